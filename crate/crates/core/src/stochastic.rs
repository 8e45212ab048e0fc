//! Stochastic gradients with mini-batch averaging.
//!
//! Averaging `m` independent draws divides the variance by `m`; choosing
//! `m_{k+1} = ⌈2 α_{k+1} D / ε⌉` lets FGM keep its deterministic iteration
//! count while the total number of samples grows like `D R² / ε²`.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::fgm::{next_alpha_tau, theoretical_iterations, FgmState, Tracker};
use crate::oracle::{delta_schedule, DeltaPower, DEFAULT_DELTA_CONSTANT};
use crate::problem::CompositeProblem;
use crate::report::{RunReport, Status};

type Sampler = dyn Fn(&[f64], &mut dyn RngCore) -> Vec<f64> + Send + Sync;
type PointBound = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Variance bound `E||g(x; ξ) - E g(x; ξ)||² <= D`, constant or point-dependent.
#[derive(Clone)]
pub enum VarianceBound {
    Constant(f64),
    Function(Arc<PointBound>),
}

impl fmt::Debug for VarianceBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarianceBound::Constant(d) => write!(f, "Constant({d})"),
            VarianceBound::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// Unbiased stochastic gradient sampler with a sample counter.
pub struct StochasticOracle {
    dim: usize,
    sampler: Box<Sampler>,
    variance: VarianceBound,
    samples: AtomicUsize,
}

impl fmt::Debug for StochasticOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StochasticOracle")
            .field("dim", &self.dim)
            .field("variance", &self.variance)
            .field("samples", &self.sample_calls())
            .finish()
    }
}

impl StochasticOracle {
    pub fn new<S>(dim: usize, variance: VarianceBound, sampler: S) -> Result<Self>
    where
        S: Fn(&[f64], &mut dyn RngCore) -> Vec<f64> + Send + Sync + 'static,
    {
        if let VarianceBound::Constant(d) = variance {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::Domain(format!("variance bound must be non-negative, got {d}")));
            }
        }
        Ok(Self {
            dim,
            sampler: Box::new(sampler),
            variance,
            samples: AtomicUsize::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One draw `g(x; ξ)`; counts as one sample call.
    pub fn sample(&self, x: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        self.samples.fetch_add(1, Ordering::Relaxed);
        (self.sampler)(x, rng)
    }

    pub fn sample_calls(&self) -> usize {
        self.samples.load(Ordering::Relaxed)
    }

    pub fn variance_at(&self, x: &[f64]) -> f64 {
        match &self.variance {
            VarianceBound::Constant(d) => *d,
            VarianceBound::Function(f) => f(x).max(0.0),
        }
    }
}

/// Mean of a batch and the unbiased sample variance `Σ||g_i - ḡ||² / (m - 1)`
/// (zero for `m = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub mean: Vec<f64>,
    pub variance: f64,
}

/// Averages `m` independent draws at `x`, summing in draw order.
pub fn batched_gradient(oracle: &StochasticOracle, x: &[f64], m: usize, rng: &mut dyn RngCore) -> Result<Batch> {
    if m == 0 {
        return Err(Error::Domain("batch size must be at least 1".into()));
    }
    check_dim(oracle.dim(), x.len())?;
    let draws: Vec<Vec<f64>> = (0..m).map(|_| oracle.sample(x, rng)).collect();
    let mut mean = vec![0.0; x.len()];
    for d in &draws {
        for (s, v) in mean.iter_mut().zip(d) {
            *s += v;
        }
    }
    for s in &mut mean {
        *s /= m as f64;
    }
    let variance = if m == 1 {
        0.0
    } else {
        draws
            .iter()
            .map(|d| d.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum::<f64>()
            / (m - 1) as f64
    };
    Ok(Batch { mean, variance })
}

/// `max(1, ⌈2 α D / ε⌉)`.
pub fn batch_size(alpha: f64, d: f64, eps: f64) -> usize {
    let m = (2.0 * alpha * d / eps).ceil();
    if m.is_finite() && m >= 1.0 {
        m as usize
    } else {
        1
    }
}

/// Iterations `Ñ` for which the deterministic part of the error is at most `ε/2`.
pub fn stochastic_iterations(l: f64, r2: f64, eps: f64) -> usize {
    theoretical_iterations(l, r2, eps / 2.0)
}

/// `max(Ñ, ⌈D R² / ε²⌉)`.
pub fn predicted_sample_budget(l: f64, r2: f64, d: f64, eps: f64) -> usize {
    let noise = (d * r2 / (eps * eps)).ceil();
    stochastic_iterations(l, r2, eps).max(if noise.is_finite() { noise as usize } else { usize::MAX })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticOptions {
    pub eps: f64,
    pub seed: u64,
    /// Bound on `V(x_*, x0)`; defaults to the setup's bound.
    pub r2: Option<f64>,
    /// Overrides `Ñ`.
    pub iterations: Option<usize>,
    /// Stop before a batch would push the sample count past this cap.
    pub max_samples: Option<usize>,
}

impl StochasticOptions {
    pub fn new(eps: f64, seed: u64) -> Self {
        Self {
            eps,
            seed,
            r2: None,
            iterations: None,
            max_samples: None,
        }
    }
}

/// FGM with batched stochastic gradients for `Ñ` iterations. `problem`
/// supplies `L`, the prox setup and the objective used for the history.
pub fn stochastic_fgm_solve(
    problem: &CompositeProblem,
    oracle: &StochasticOracle,
    opts: &StochasticOptions,
) -> Result<RunReport> {
    check_dim(problem.dim(), oracle.dim())?;
    if !(opts.eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {}", opts.eps)));
    }
    let l = problem
        .lipschitz()
        .ok_or_else(|| Error::Config("stochastic FGM needs a Lipschitz constant".into()))?;
    let r2 = opts.r2.unwrap_or(problem.setup().r2_bound());
    let n_iter = match opts.iterations {
        Some(n) => n,
        None if r2.is_finite() => stochastic_iterations(l, r2, opts.eps),
        None => return Err(Error::Config("iteration count needs a finite R² bound".into())),
    };
    let delta_budget = delta_schedule(opts.eps, n_iter.max(1), DeltaPower::One, DEFAULT_DELTA_CONSTANT)?;
    if problem.delta() > delta_budget {
        return Err(Error::Domain(format!(
            "oracle inexactness {} exceeds the budget {delta_budget}",
            problem.delta()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let tracker = Tracker::new(problem);
    let samples0 = oracle.sample_calls();
    let mut state = FgmState::new(problem, l);
    let mut report = RunReport::empty(Status::Converged);
    let f0 = problem.objective(&state.y);
    report.records.push(tracker.record(problem, 0, f0, f64::INFINITY, l, 0, 0));
    let mut f_last = f0;
    while state.k < n_iter {
        let (alpha, tau) = next_alpha_tau(l, state.alpha, state.lipschitz);
        let x = state.coupled(tau);
        let m = batch_size(alpha, oracle.variance_at(&x), opts.eps);
        let used = oracle.sample_calls() - samples0;
        if opts.max_samples.is_some_and(|cap| used + m > cap) {
            report.status = Status::BudgetExhausted;
            break;
        }
        let batch = batched_gradient(oracle, &x, m, &mut rng)?;
        let ystep = problem.grad_step(&x, &batch.mean, f64::NAN, l)?;
        let inner = state.commit(problem, x, f64::NAN, &batch.mean, alpha, l, problem.delta(), ystep)?;
        f_last = problem.objective(&state.y);
        let samples = oracle.sample_calls() - samples0;
        report
            .records
            .push(tracker.record(problem, state.k, f_last, f64::INFINITY, l, inner, samples));
    }
    report.solution = state.y.clone();
    report.best_value = f_last;
    report.iterations = state.k;
    report.sample_calls = oracle.sample_calls() - samples0;
    report.delta_accumulation = state.delta_accumulation();
    report.max_lipschitz = l;
    tracker.finish(problem, &mut report);
    Ok(report)
}
