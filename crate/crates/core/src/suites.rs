//! Reference problems and ε-sweeps shared by the acceptance suite, the CLI
//! benchmark and the criterion benches.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fgm::{fgm_solve, FgmOptions, LipschitzMode};
use crate::linalg::dot;
use crate::oracle::FirstOrderOracle;
use crate::problem::{Composite, CompositeProblem, FeasibleSet};
use crate::prox::ProxSetup;
use crate::restart::{restart_solve, RestartLipschitz, RestartOptions};
use crate::stats::{fit_loglog, SlopeFit};
use crate::universal::BacktrackConfig;

/// Iteration cap for sweeps; the nonsmooth suite needs about 4·10⁶ at ε = 1e-4.
pub const SWEEP_MAX_ITERATIONS: usize = 100_000_000;

/// `½ Σ w_i (x_i - t_i)²` on a box with the Euclidean setup.
pub fn weighted_quadratic(weights: &[f64], target: &[f64], domain: FeasibleSet) -> Result<CompositeProblem> {
    if weights.len() != target.len() || domain.dim() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            got: weights.len().min(domain.dim()),
        });
    }
    let (w, t) = (weights.to_vec(), target.to_vec());
    let oracle = FirstOrderOracle::new(t.len(), move |x| {
        let g: Vec<f64> = (0..x.len()).map(|i| w[i] * (x[i] - t[i])).collect();
        let v = 0.5 * (0..x.len()).map(|i| w[i] * (x[i] - t[i]).powi(2)).sum::<f64>();
        (v, g)
    });
    let lmax = weights.iter().cloned().fold(0.0, f64::max);
    let lmin = weights.iter().cloned().fold(f64::INFINITY, f64::min);
    let setup = ProxSetup::euclidean(domain, None)?;
    let p = CompositeProblem::new(Arc::new(oracle), Composite::zero(), setup)?.with_lipschitz(lmax)?;
    if lmin > 0.0 {
        p.with_strong_convexity(lmin)
    } else {
        Ok(p)
    }
}

/// `½ ||x - t||²` on `[lo, hi]^n`, with `L = 1`.
pub fn box_quadratic(target: &[f64], lo: f64, hi: f64) -> Result<CompositeProblem> {
    let n = target.len();
    let domain = FeasibleSet::new_box(vec![lo; n], vec![hi; n])?;
    weighted_quadratic(&vec![1.0; n], target, domain)
}

/// Where the minimum of [`abs_problem`] sits.
pub const ABS_MINIMIZER: f64 = 0.15;

/// `|x - 0.15|` on `[-0.5, 0.5]`: a piecewise-linear objective (Hölder exponent 0, `L_0 = 2`).
pub fn abs_problem() -> Result<CompositeProblem> {
    let oracle = FirstOrderOracle::new(1, |x| {
        let d = x[0] - ABS_MINIMIZER;
        (d.abs(), vec![if d >= 0.0 { 1.0 } else { -1.0 }])
    });
    let setup = ProxSetup::euclidean(FeasibleSet::new_box(vec![-0.5], vec![0.5])?, None)?;
    CompositeProblem::new(Arc::new(oracle), Composite::zero(), setup)
}

/// Value and gradient of `½ Σ_{i=1}^{n-1} (x_{i+1} - x_i)² + ½ x_1² + ½ x_n² - x_1`.
pub fn tridiagonal_value_grad(x: &[f64]) -> (f64, Vec<f64>) {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut v = 0.5 * x[0] * x[0] + 0.5 * x[n - 1] * x[n - 1] - x[0];
    g[0] += x[0] - 1.0;
    g[n - 1] += x[n - 1];
    for i in 1..n {
        let d = x[i] - x[i - 1];
        v += 0.5 * d * d;
        g[i] += d;
        g[i - 1] -= d;
    }
    (v, g)
}

/// The tridiagonal worst-case quadratic on `[-1, 1]^n` (Hölder exponent 1, `L <= 4`).
pub fn tridiagonal_problem(n: usize) -> Result<CompositeProblem> {
    if n < 2 {
        return Err(Error::Domain("the tridiagonal problem needs n >= 2".into()));
    }
    let oracle = FirstOrderOracle::new(n, tridiagonal_value_grad);
    let setup = ProxSetup::euclidean(FeasibleSet::unit_box(n), None)?;
    CompositeProblem::new(Arc::new(oracle), Composite::zero(), setup)?.with_lipschitz(4.0)
}

/// A 4-dimensional quadratic with curvatures in `[1, 100]` and an interior minimizer.
pub fn conditioned_quadratic() -> Result<(CompositeProblem, Vec<f64>)> {
    let target = vec![0.8, 0.3, -0.65, 0.1];
    let p = weighted_quadratic(&[1.0, 10.0, 50.0, 100.0], &target, FeasibleSet::unit_box(4))?;
    Ok((p, target))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub iterations: usize,
    pub grad_calls: usize,
    pub fval_calls: usize,
    pub final_gap: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub name: String,
    pub rows: Vec<SweepRow>,
    /// Least-squares fit of `ln N` against `ln(1/ε)`.
    pub fit: Option<SlopeFit>,
    /// The slope the theory predicts.
    pub expected_slope: f64,
}

impl Sweep {
    fn from_rows(name: &str, rows: Vec<SweepRow>, expected_slope: f64) -> Self {
        let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
        let counts: Vec<f64> = rows.iter().map(|r| r.iterations.max(1) as f64).collect();
        let fit = if rows.len() >= 2 { fit_loglog(&eps, &counts).ok() } else { None };
        Self {
            name: name.to_string(),
            rows,
            fit,
            expected_slope,
        }
    }

    /// Plain-text table of the sweep.
    pub fn table(&self) -> String {
        let mut s = format!("suite {} (expected slope {})\n", self.name, self.expected_slope);
        s.push_str("eps        iterations  grad_calls  fval_calls  gap         converged\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:<10.1e} {:>10}  {:>10}  {:>10}  {:<10.3e}  {}\n",
                r.eps, r.iterations, r.grad_calls, r.fval_calls, r.final_gap, r.converged
            ));
        }
        match &self.fit {
            Some(f) => s.push_str(&format!("slope {:.3}  R^2 {:.4}\n", f.slope, f.r2)),
            None => s.push_str("slope n/a\n"),
        }
        s
    }
}

fn universal_row(problem: &CompositeProblem, eps: f64) -> Result<SweepRow> {
    let mut opts = FgmOptions::new(eps).with_mode(LipschitzMode::Adaptive(BacktrackConfig::default()));
    opts.max_iterations = SWEEP_MAX_ITERATIONS;
    let r = fgm_solve(problem, &opts)?;
    Ok(SweepRow {
        eps,
        iterations: r.iterations,
        grad_calls: r.grad_calls,
        fval_calls: r.fval_calls,
        final_gap: r.final_gap,
        converged: r.converged(),
    })
}

/// Universal method on [`abs_problem`]; iterations grow like `ε^{-2}`.
pub fn universal_nonsmooth_sweep(eps: &[f64]) -> Result<Sweep> {
    let p = abs_problem()?;
    let rows = eps.iter().map(|&e| universal_row(&p, e)).collect::<Result<Vec<_>>>()?;
    Ok(Sweep::from_rows("universal-nonsmooth", rows, 2.0))
}

/// Universal method on the 20-dimensional tridiagonal quadratic; iterations grow like `ε^{-1/2}`.
pub fn universal_smooth_sweep(eps: &[f64]) -> Result<Sweep> {
    let p = tridiagonal_problem(20)?;
    let rows = eps.iter().map(|&e| universal_row(&p, e)).collect::<Result<Vec<_>>>()?;
    Ok(Sweep::from_rows("universal-smooth", rows, 0.5))
}

/// Constant-L method on the tridiagonal quadratic.
pub fn fgm_sweep(eps: &[f64]) -> Result<Sweep> {
    let p = tridiagonal_problem(20)?;
    let rows = eps
        .iter()
        .map(|&e| {
            let r = fgm_solve(&p, &FgmOptions::new(e))?;
            Ok(SweepRow {
                eps: e,
                iterations: r.iterations,
                grad_calls: r.grad_calls,
                fval_calls: r.fval_calls,
                final_gap: r.final_gap,
                converged: r.converged(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Sweep::from_rows("fgm", rows, 0.5))
}

/// Restarts on [`conditioned_quadratic`]; iterations grow like `ln(1/ε)`, so
/// the log-log slope tends to zero.
pub fn restart_sweep(eps: &[f64]) -> Result<Sweep> {
    let (p, target) = conditioned_quadratic()?;
    let rows = eps
        .iter()
        .map(|&e| {
            let mut opts = RestartOptions::new(e, RestartLipschitz::Known(100.0));
            opts.early_exit = true;
            let r = restart_solve(&p, &opts)?;
            let d: Vec<f64> = r.solution.iter().zip(&target).map(|(a, b)| a - b).collect();
            Ok(SweepRow {
                eps: e,
                iterations: r.iterations,
                grad_calls: r.grad_calls,
                fval_calls: r.fval_calls,
                final_gap: 0.5 * 100.0 * dot(&d, &d),
                converged: r.converged(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Sweep::from_rows("restart", rows, 0.0))
}

/// Suite names accepted by [`run_suite`].
pub const SUITE_NAMES: [&str; 4] = ["universal", "fgm", "restart", "all"];

/// Runs a named suite; `universal` yields the nonsmooth and smooth sweeps.
pub fn run_suite(name: &str, eps: &[f64]) -> Result<Vec<Sweep>> {
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Domain("sweep tolerances must be positive".into()));
    }
    match name {
        "universal" => Ok(vec![universal_nonsmooth_sweep(eps)?, universal_smooth_sweep(eps)?]),
        "fgm" => Ok(vec![fgm_sweep(eps)?]),
        "restart" => Ok(vec![restart_sweep(eps)?]),
        "all" => {
            let mut v = run_suite("universal", eps)?;
            v.extend(run_suite("fgm", eps)?);
            v.extend(run_suite("restart", eps)?);
            Ok(v)
        }
        other => Err(Error::Config(format!(
            "unknown suite {other:?}, expected one of {}",
            SUITE_NAMES.join(", ")
        ))),
    }
}
