//! Composite fast gradient method in linear-coupling form.
//!
//! Each iteration couples `x = τ z + (1 - τ) y`, takes a proximal gradient
//! step from `x` to get `y`, and a mirror step from `z` with weight `α` to get
//! `z`. The weighted linear models collected along the way give a lower bound
//! on `F_*` and hence a computable optimality certificate.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{axpy, convex_comb, dot};
use crate::problem::CompositeProblem;
use crate::prox::{self, GradStep, ProxKernel};
use crate::report::{IterRecord, RunReport, Status};
use crate::restart::grad_mapping_norm;
use crate::universal::{adaptive_step, BacktrackConfig};

/// `(α_{k+1}, τ_k)` from `α_{k+1} = 1/(2L') + sqrt(1/(4L'²) + α_k² L_k / L')`
/// and `τ_k = 1/(α_{k+1} L')`. `alpha_k = 0` yields `α_1 = 1/L'`.
pub fn next_alpha_tau(l_next: f64, alpha_k: f64, l_k: f64) -> (f64, f64) {
    let prev = if alpha_k == 0.0 { 0.0 } else { alpha_k * alpha_k * l_k / l_next };
    let alpha = 0.5 / l_next + (0.25 / (l_next * l_next) + prev).sqrt();
    (alpha, 1.0 / (alpha * l_next))
}

/// Smallest `N >= 1` with `4 L R² / (N + 1)² <= eps`.
pub fn theoretical_iterations(l: f64, r2: f64, eps: f64) -> usize {
    let n = (4.0 * l * r2 / eps).sqrt().ceil() - 1.0;
    if n.is_finite() {
        (n as usize).max(1)
    } else {
        usize::MAX
    }
}

/// `Σ α_i [f(x_i) + <g_i, · - x_i>]` stored as an offset and a gradient sum.
#[derive(Debug, Clone, PartialEq)]
pub struct DualAccumulator {
    pub offset: f64,
    pub grad_sum: Vec<f64>,
    pub weight: f64,
}

impl DualAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            offset: 0.0,
            grad_sum: vec![0.0; n],
            weight: 0.0,
        }
    }

    pub fn add(&mut self, alpha: f64, fx: f64, g: &[f64], x: &[f64]) {
        self.offset += alpha * (fx - dot(g, x));
        axpy(alpha, g, &mut self.grad_sum);
        self.weight += alpha;
    }

    fn averaged_slope(&self) -> Vec<f64> {
        self.grad_sum.iter().map(|v| v / self.weight).collect()
    }

    /// `min_{x in Q} [model(x) / A + h(x)]`, a lower bound on `F_*`.
    pub fn lower_bound(&self, problem: &CompositeProblem) -> Result<f64> {
        if self.weight == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let (v, _) = problem.minimize_linear_plus_h(&self.averaged_slope())?;
        Ok(self.offset / self.weight + v)
    }

    /// `min_{x in Q} [model(x) + A h(x) + V(x, x0)] / A`.
    pub fn prox_bound(&self, problem: &CompositeProblem) -> Result<f64> {
        if self.weight == 0.0 {
            return Ok(f64::INFINITY);
        }
        let setup = problem.setup();
        let a = self.weight;
        let gc = setup.raw_grad(setup.center());
        let lin: Vec<f64> = self.grad_sum.iter().zip(&gc).map(|(s, c)| (s - c) / a).collect();
        let x = prox::minimize_model(setup, problem.composite(), &lin, 1.0 / a)?.x;
        Ok(self.offset / a + dot(&self.grad_sum, &x) / a + problem.h(&x) + setup.d(&x) / a)
    }

    /// Upper bound on `best_f - F_*`: the smaller of `best_f - lower_bound` and
    /// `best_f - prox_bound + R²/A` (the latter only for closed-form prox setups).
    pub fn gap(&self, problem: &CompositeProblem, best_f: f64) -> Result<f64> {
        let mut gap = best_f - self.lower_bound(problem)?;
        let r2 = problem.setup().r2_bound();
        if r2.is_finite() && !matches!(problem.setup().kernel(), ProxKernel::PowerNorm { .. }) {
            gap = gap.min(best_f - self.prox_bound(problem)? + r2 / self.weight);
        }
        Ok(gap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FgmState {
    pub k: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub alpha: f64,
    pub a_sum: f64,
    /// Smoothness estimate used by the latest step.
    pub lipschitz: f64,
    pub accum: DualAccumulator,
    delta_weighted: f64,
}

impl FgmState {
    /// All three sequences start at the prox center.
    pub fn new(problem: &CompositeProblem, l0: f64) -> Self {
        let x0 = problem.setup().center().to_vec();
        Self {
            k: 0,
            x: x0.clone(),
            y: x0.clone(),
            z: x0,
            alpha: 0.0,
            a_sum: 0.0,
            lipschitz: l0,
            accum: DualAccumulator::new(problem.dim()),
            delta_weighted: 0.0,
        }
    }

    /// `Σ A_k δ_k / A_N`.
    pub fn delta_accumulation(&self) -> f64 {
        if self.a_sum > 0.0 {
            self.delta_weighted / self.a_sum
        } else {
            0.0
        }
    }

    /// The coupled point `τ z + (1 - τ) y`.
    pub(crate) fn coupled(&self, tau: f64) -> Vec<f64> {
        convex_comb(tau, &self.z, &self.y)
    }

    /// Completes an iteration given the coupled point, its oracle output and
    /// the already computed gradient step. Returns inner-solver iterations.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn commit(
        &mut self,
        problem: &CompositeProblem,
        x: Vec<f64>,
        fx: f64,
        g: &[f64],
        alpha: f64,
        l: f64,
        delta: f64,
        ystep: GradStep,
    ) -> Result<usize> {
        let zstep = problem.mirror_step(&self.z, g, alpha)?;
        self.accum.add(alpha, fx, g, &x);
        self.a_sum += alpha;
        self.delta_weighted += self.a_sum * delta;
        self.x = x;
        self.y = ystep.x;
        self.z = zstep.x;
        self.alpha = alpha;
        self.lipschitz = l;
        self.k += 1;
        Ok(ystep.inner_iterations + zstep.inner_iterations)
    }
}

/// What one iteration produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// `F(y)` when the step already evaluated it.
    pub f_y: Option<f64>,
    pub inner_iterations: usize,
    pub lipschitz: f64,
    /// Backtracking trials (1 for constant-L steps).
    pub trials: usize,
}

/// One constant-L iteration; exactly one gradient call.
pub fn fgm_step(state: &mut FgmState, problem: &CompositeProblem) -> Result<StepOutcome> {
    let l = problem
        .lipschitz()
        .ok_or_else(|| Error::Config("constant-L steps need a Lipschitz constant".into()))?;
    let (alpha, tau) = next_alpha_tau(l, state.alpha, state.lipschitz);
    let x = state.coupled(tau);
    let (fx, g) = problem.oracle().eval(&x);
    let ystep = problem.grad_step(&x, &g, fx, l)?;
    let inner = state.commit(problem, x, fx, &g, alpha, l, problem.delta(), ystep)?;
    Ok(StepOutcome {
        f_y: None,
        inner_iterations: inner,
        lipschitz: l,
        trials: 1,
    })
}

/// Primal-dual certificate of the current state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// `F(y^N)`.
    pub primal: f64,
    /// `min_Q [model / A_N + h]`, a lower bound on `F_*`.
    pub dual: f64,
    /// `primal - dual >= F(y^N) - F_*`.
    pub gap: f64,
    /// `min_Q [model + A_N h + V(·, x0)] / A_N`, an upper bound on `F(y^N)` for exact oracles.
    pub prox_model: f64,
}

pub fn dual_certificate(state: &FgmState, problem: &CompositeProblem) -> Result<Certificate> {
    let primal = problem.objective(&state.y);
    let acc = &state.accum;
    if acc.weight == 0.0 {
        return Ok(Certificate {
            primal,
            dual: f64::NEG_INFINITY,
            gap: f64::INFINITY,
            prox_model: f64::INFINITY,
        });
    }
    let dual = acc.lower_bound(problem)?;
    let prox_model = acc.prox_bound(problem)?;
    Ok(Certificate {
        primal,
        dual,
        gap: primal - dual,
        prox_model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Certificate gap `<= eps` (requires a bounded feasible set).
    Certificate,
    /// A fixed number of iterations.
    Iterations(usize),
    /// Gradient-mapping norm at `y` below `sqrt(2 μ eps)` (or `eps` when `μ = 0`).
    GradMapping,
    /// Run until the gradient-call budget is spent.
    Budget,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LipschitzMode {
    /// Use the problem's Lipschitz constant.
    Constant,
    /// Backtracking on `L`, starting from `l0`.
    Adaptive(BacktrackConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FgmOptions {
    pub eps: f64,
    pub stop: StopRule,
    pub mode: LipschitzMode,
    pub max_grad_calls: Option<usize>,
    pub max_iterations: usize,
    /// Also stop as soon as the certificate gap drops below `eps`, whatever the stop rule.
    pub gap_exit: bool,
}

impl FgmOptions {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            stop: StopRule::Certificate,
            mode: LipschitzMode::Constant,
            max_grad_calls: None,
            max_iterations: 1_000_000,
            gap_exit: false,
        }
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_mode(mut self, mode: LipschitzMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_budget(mut self, max_grad_calls: usize) -> Self {
        self.max_grad_calls = Some(max_grad_calls);
        self
    }
}

/// Shared bookkeeping for records: counters are reported relative to the
/// values at construction.
pub(crate) struct Tracker {
    start: Instant,
    grad0: usize,
    fval0: usize,
    pub iter_offset: usize,
    pub restart: usize,
}

impl Tracker {
    pub fn new(problem: &CompositeProblem) -> Self {
        Self {
            start: Instant::now(),
            grad0: problem.oracle().grad_calls(),
            fval0: problem.oracle().fval_calls(),
            iter_offset: 0,
            restart: 0,
        }
    }

    pub fn grad_calls(&self, problem: &CompositeProblem) -> usize {
        problem.oracle().grad_calls() - self.grad0
    }

    pub fn fval_calls(&self, problem: &CompositeProblem) -> usize {
        problem.oracle().fval_calls() - self.fval0
    }

    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &self,
        problem: &CompositeProblem,
        iter: usize,
        f_value: f64,
        gap: f64,
        lipschitz: f64,
        inner_iters: usize,
        sample_calls: usize,
    ) -> IterRecord {
        IterRecord {
            iter: self.iter_offset + iter,
            grad_calls: self.grad_calls(problem),
            fval_calls: self.fval_calls(problem),
            sample_calls,
            f_value,
            gap,
            lipschitz,
            restart: self.restart,
            inner_iters,
            ms: self.start.elapsed().as_secs_f64() * 1e3,
        }
    }

    pub fn finish(&self, problem: &CompositeProblem, report: &mut RunReport) {
        report.grad_calls = self.grad_calls(problem);
        report.fval_calls = self.fval_calls(problem);
    }
}

/// Runs the method until its stop rule fires.
pub fn fgm_solve(problem: &CompositeProblem, opts: &FgmOptions) -> Result<RunReport> {
    let tracker = Tracker::new(problem);
    let (mut report, _) = run(problem, opts, &tracker)?;
    tracker.finish(problem, &mut report);
    Ok(report)
}

/// The solver loop; also used for restart segments.
pub(crate) fn run(problem: &CompositeProblem, opts: &FgmOptions, tr: &Tracker) -> Result<(RunReport, FgmState)> {
    if !(opts.eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {}", opts.eps)));
    }
    let bounded = problem.feasible_set().is_bounded();
    if opts.stop == StopRule::Certificate && !bounded {
        return Err(Error::Unsupported(
            "the certificate stop rule needs a bounded feasible set".into(),
        ));
    }
    if opts.stop == StopRule::Budget && opts.max_grad_calls.is_none() {
        return Err(Error::Config("the budget stop rule needs max_oracle_calls".into()));
    }
    let (l_init, adaptive) = match &opts.mode {
        LipschitzMode::Constant => (
            problem
                .lipschitz()
                .ok_or_else(|| Error::Config("constant-L mode needs a Lipschitz constant".into()))?,
            None,
        ),
        LipschitzMode::Adaptive(cfg) => {
            cfg.validate()?;
            (cfg.l0, Some(cfg))
        }
    };
    let mut state = FgmState::new(problem, l_init);
    let mut report = RunReport::empty(Status::Converged);
    let x0 = state.y.clone();
    let grad_base = tr.grad_calls(problem);

    // At the start only the single linearization at x0 is available.
    let (mut best_f, mut gap) = if opts.stop == StopRule::Certificate {
        let (fx, g) = problem.oracle().eval(&x0);
        let f0 = fx + problem.h(&x0);
        let (lmin, _) = problem.minimize_linear_plus_h(&g)?;
        (f0, f0 - (fx - dot(&g, &x0) + lmin))
    } else {
        (problem.objective(&x0), f64::INFINITY)
    };
    let mut best_x = x0;
    let mut max_l: f64 = 0.0;
    report.records.push(tr.record(problem, 0, best_f, gap, l_init, 0, 0));
    let mut status = Status::Converged;
    let done_at_start = opts.stop == StopRule::Certificate && gap <= opts.eps;

    loop {
        if done_at_start {
            break;
        }
        if let StopRule::Iterations(n) = opts.stop {
            if state.k >= n {
                break;
            }
        }
        if state.k >= opts.max_iterations {
            status = Status::BudgetExhausted;
            break;
        }
        let remaining = opts
            .max_grad_calls
            .map(|b| b.saturating_sub(tr.grad_calls(problem) - grad_base));
        if remaining == Some(0) {
            status = Status::BudgetExhausted;
            break;
        }
        let out = match adaptive {
            None => fgm_step(&mut state, problem)?,
            Some(cfg) => match adaptive_step(&mut state, problem, opts.eps, cfg, remaining)? {
                Some(out) => out,
                None => {
                    status = Status::BudgetExhausted;
                    break;
                }
            },
        };
        let f_y = out.f_y.unwrap_or_else(|| problem.objective(&state.y));
        if f_y < best_f {
            best_f = f_y;
            best_x = state.y.clone();
        }
        if bounded {
            gap = state.accum.gap(problem, best_f)?;
        }
        max_l = max_l.max(out.lipschitz);
        report
            .records
            .push(tr.record(problem, state.k, f_y, gap, out.lipschitz, out.inner_iterations, 0));
        let gap_done = gap <= opts.eps && (opts.stop == StopRule::Certificate || opts.gap_exit);
        if gap_done {
            break;
        }
        if opts.stop == StopRule::GradMapping {
            let threshold = if problem.mu() > 0.0 {
                (2.0 * problem.mu() * opts.eps).sqrt()
            } else {
                opts.eps
            };
            if grad_mapping_norm(problem, &state.y, state.lipschitz)? <= threshold {
                break;
            }
        }
    }

    report.status = status;
    report.solution = best_x;
    report.best_value = best_f;
    report.final_gap = gap;
    report.iterations = state.k;
    report.delta_accumulation = state.delta_accumulation();
    report.max_lipschitz = if max_l > 0.0 { max_l } else { l_init };
    tr.finish(problem, &mut report);
    Ok((report, state))
}
