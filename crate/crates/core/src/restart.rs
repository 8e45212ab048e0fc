//! Restarts for strongly convex composites and the regularization reduction.
//!
//! With `F` μ-strongly convex, `N̄ = ⌈sqrt(8 L ω_n / μ)⌉` FGM iterations halve
//! the squared distance to the minimizer, so restarting the prox center at
//! the output gives a linear rate. A merely convex problem is made strongly
//! convex by adding `γ V(x, x0)` with `γ = ε / (2R²)`.

use crate::error::{Error, Result};
use crate::fgm::{self, FgmOptions, LipschitzMode, StopRule, Tracker};
use crate::problem::{CompositeProblem, ProxPenalty};
use crate::report::{RunReport, Status};
use crate::universal::BacktrackConfig;

/// `⌈sqrt(8 L ω_n / μ)⌉`.
pub fn restart_length(l: f64, mu: f64, omega_n: f64) -> Result<usize> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    if !(l > 0.0) || !(omega_n > 0.0) {
        return Err(Error::Domain("L and omega_n must be positive".into()));
    }
    Ok(((8.0 * l * omega_n / mu).sqrt().ceil() as usize).max(1))
}

/// `max(1, ⌈log₂(μ R² / ε)⌉)`.
pub fn restart_count(mu: f64, r2: f64, eps: f64) -> usize {
    let k = (mu * r2 / eps).log2().ceil();
    if k.is_finite() && k >= 1.0 {
        k as usize
    } else {
        1
    }
}

/// Total iteration estimate `sqrt(8 L ω_n / μ) ⌈log₂(μ R² / ε)⌉`.
pub fn restart_prediction(l: f64, mu: f64, omega_n: f64, r2: f64, eps: f64) -> f64 {
    (8.0 * l * omega_n / mu).sqrt() * restart_count(mu, r2, eps) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub enum RestartLipschitz {
    Known(f64),
    /// Backtracking inside each segment; the segment length uses the largest
    /// constant accepted during the previous segment.
    Adaptive(BacktrackConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartOptions {
    pub eps: f64,
    pub lipschitz: RestartLipschitz,
    /// Bound on `||x0 - x_*||²`; defaults to twice the setup's bound on `V(x, x0)`.
    pub r2: Option<f64>,
    /// Overrides the restart count.
    pub count: Option<usize>,
    /// Stop as soon as the certificate gap of a segment drops below `eps`.
    pub early_exit: bool,
    pub max_grad_calls: Option<usize>,
}

impl RestartOptions {
    pub fn new(eps: f64, lipschitz: RestartLipschitz) -> Self {
        Self {
            eps,
            lipschitz,
            r2: None,
            count: None,
            early_exit: false,
            max_grad_calls: None,
        }
    }
}

/// Runs `restart_count` segments of `N̄` iterations, re-centering the prox at
/// the last `y` of each segment.
pub fn restart_solve(problem: &CompositeProblem, opts: &RestartOptions) -> Result<RunReport> {
    let mu = problem.mu();
    if !(mu > 0.0) {
        return Err(Error::Domain("restarts need a positive strong-convexity constant".into()));
    }
    if !(opts.eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {}", opts.eps)));
    }
    let setup = problem.setup();
    let r2 = opts.r2.unwrap_or(2.0 * setup.r2_bound());
    let count = match opts.count {
        Some(c) => c.max(1),
        None if r2.is_finite() => restart_count(mu, r2, opts.eps),
        None => {
            return Err(Error::Config(
                "restart count needs a finite bound on the initial distance".into(),
            ))
        }
    };
    let omega = setup.omega_n();
    let mut l_seg = match &opts.lipschitz {
        RestartLipschitz::Known(l) => *l,
        RestartLipschitz::Adaptive(cfg) => cfg.l0,
    };

    let mut tracker = Tracker::new(problem);
    let mut report = RunReport::empty(Status::Converged);
    let mut center = setup.center().to_vec();
    report.restart_points.push(center.clone());
    let mut delta_sum = 0.0;

    for r in 0..count {
        let n_bar = restart_length(l_seg, mu, omega)?;
        let mut seg_problem = problem.recentered(&center)?;
        let mode = match &opts.lipschitz {
            RestartLipschitz::Known(l) => {
                seg_problem = seg_problem.with_lipschitz(*l)?;
                LipschitzMode::Constant
            }
            RestartLipschitz::Adaptive(cfg) => LipschitzMode::Adaptive(BacktrackConfig { l0: l_seg, ..*cfg }),
        };
        let fopts = FgmOptions {
            eps: opts.eps,
            stop: StopRule::Iterations(n_bar),
            mode,
            max_grad_calls: opts.max_grad_calls.map(|b| b.saturating_sub(tracker.grad_calls(problem))),
            max_iterations: usize::MAX,
            gap_exit: opts.early_exit,
        };
        tracker.restart = r;
        tracker.iter_offset = report.iterations;
        let (seg, state) = fgm::run(&seg_problem, &fopts, &tracker)?;
        let skip = if r == 0 { 0 } else { 1 };
        report.records.extend(seg.records.into_iter().skip(skip));
        report.iterations += state.k;
        delta_sum += seg.delta_accumulation;
        if seg.best_value < report.best_value || report.solution.is_empty() {
            report.best_value = seg.best_value;
            report.solution = seg.solution.clone();
        }
        report.final_gap = seg.final_gap;
        report.max_lipschitz = report.max_lipschitz.max(seg.max_lipschitz);
        center = state.y.clone();
        report.restart_points.push(center.clone());
        if let RestartLipschitz::Adaptive(_) = opts.lipschitz {
            l_seg = seg.max_lipschitz;
        }
        if seg.status != Status::Converged {
            report.status = seg.status;
            break;
        }
        if opts.early_exit && seg.final_gap <= opts.eps {
            break;
        }
    }
    report.delta_accumulation = delta_sum;
    tracker.finish(problem, &mut report);
    Ok(report)
}

/// `γ = ε / (2 R²)`.
pub fn regularization_weight(eps: f64, r2: f64) -> Result<f64> {
    if !(eps > 0.0) || !(r2 > 0.0) {
        return Err(Error::Domain("eps and R² must be positive".into()));
    }
    Ok(eps / (2.0 * r2))
}

/// `F^γ = F + γ V(·, x0)` with `γ = ε / (2R²)`, declared `γ`-strongly convex on top of `F`.
pub fn regularize(problem: &CompositeProblem, eps: f64, r2: f64) -> Result<CompositeProblem> {
    let gamma = regularization_weight(eps, r2)?;
    let mut composite = problem.composite().clone();
    if composite.penalty.is_some() {
        return Err(Error::Unsupported("problem is already regularized".into()));
    }
    composite.penalty = Some(ProxPenalty {
        weight: gamma,
        center: problem.setup().center().to_vec(),
    });
    problem
        .clone()
        .with_composite(composite)
        .with_strong_convexity(problem.mu() + gamma)
}

/// `L ||x - Grad_L(x)||` in the setup norm; one gradient call.
pub fn grad_mapping_norm(problem: &CompositeProblem, x: &[f64], l: f64) -> Result<f64> {
    let (fx, g) = problem.oracle().eval(x);
    let step = problem.grad_step(x, &g, fx, l)?;
    Ok(l * problem.setup().norm().dist(x, &step.x))
}
