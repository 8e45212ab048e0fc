//! Entropy-regularized least squares on the simplex,
//!
//! ```text
//! min_{x in S_n}  ½||Ax - b||² + μ Σ x_k ln x_k,
//! ```
//!
//! and the dual inner solver for the power-norm prox subproblem
//!
//! ```text
//! min_{x in S_n}  <c, x> + ||x||_a² + μ̄ Σ x_k ln x_k.
//! ```
//!
//! The inner problem is dualized in the simplex constraint and in
//! `||x||_a² <= t`; for fixed multipliers it splits into `n` one-dimensional
//! problems solved by bisection, and the two multipliers are found by a 2D
//! ellipsoid method.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::fgm::{fgm_solve, FgmOptions};
use crate::linalg::{dot, norm_inf, xlogx};
use crate::oracle::FirstOrderOracle;
use crate::problem::{Composite, CompositeProblem};
use crate::prox::ProxSetup;
use crate::report::RunReport;
use crate::restart::{restart_solve, RestartLipschitz, RestartOptions};
use crate::sparse::CscMatrix;

/// Left end of the bisection bracket.
pub const BISECTION_FLOOR: f64 = 1e-12;

/// Unit-coefficient power-norm subproblem `min <c,x> + ||x||_a² + μ̄ Σ x ln x` on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSubproblem {
    c: Vec<f64>,
    mu_bar: f64,
    a: f64,
}

impl InnerSubproblem {
    pub fn new(c: Vec<f64>, mu_bar: f64, a: f64) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::Domain("empty subproblem".into()));
        }
        if !(a > 1.0 && a < 2.0) {
            return Err(Error::Domain(format!("exponent must lie in (1, 2), got {a}")));
        }
        if !(mu_bar >= 0.0) || !mu_bar.is_finite() {
            return Err(Error::Domain(format!("entropy weight must be non-negative, got {mu_bar}")));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite linear term".into()));
        }
        Ok(Self { c, mu_bar, a })
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn mu_bar(&self) -> f64 {
        self.mu_bar
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    /// Primal objective at `x`.
    pub fn value(&self, x: &[f64]) -> f64 {
        let s: f64 = x.iter().map(|&v| if v > 0.0 { v.powf(self.a) } else { 0.0 }).sum();
        dot(&self.c, x) + s.powf(2.0 / self.a) + self.mu_bar * x.iter().map(|&v| xlogx(v)).sum::<f64>()
    }
}

/// Multipliers of the simplex constraint (`lambda1`) and the norm constraint (`lambda2 >= 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPoint {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl DualPoint {
    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        Self { lambda1, lambda2 }
    }

    pub fn norm1(&self) -> f64 {
        self.lambda1.abs() + self.lambda2.abs()
    }
}

/// `t(λ) = min{(λ₂ a / 2)^{2/(2-a)}, n^{2/a}}`.
pub fn t_of_lambda(lambda2: f64, a: f64, n: usize) -> f64 {
    if lambda2 <= 0.0 {
        return 0.0;
    }
    (lambda2 * a / 2.0).powf(2.0 / (2.0 - a)).min((n as f64).powf(2.0 / a))
}

fn coordinate_derivative(ck: f64, l: DualPoint, sub: &InnerSubproblem, x: f64) -> f64 {
    ck + l.lambda1 + l.lambda2 * sub.a * x.powf(sub.a - 1.0) + sub.mu_bar * (x.ln() + 1.0)
}

/// Bisection on the stationarity condition of one coordinate problem over `[0, 1]`.
fn coordinate_min(ck: f64, l: DualPoint, sub: &InnerSubproblem, tol: f64) -> f64 {
    if coordinate_derivative(ck, l, sub, 1.0) <= 0.0 {
        return 1.0;
    }
    let mut lo = BISECTION_FLOOR;
    if coordinate_derivative(ck, l, sub, lo) >= 0.0 {
        // The root lies below the bracket; the λ₂ term only pushes it further left.
        return lo.min((-(ck + l.lambda1) / sub.mu_bar - 1.0).exp());
    }
    let mut hi = 1.0;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if coordinate_derivative(ck, l, sub, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Approximate minimizer `(x̃, t)` of the Lagrangian at `lambda`; each
/// coordinate is within `sigma / n` of the exact one.
pub fn inner_primal_from_dual(lambda: DualPoint, sub: &InnerSubproblem, sigma: f64) -> Result<(Vec<f64>, f64)> {
    if !(sub.mu_bar > 0.0) {
        return Err(Error::Domain(
            "bisection needs a positive entropy weight; use the entropy setup when it vanishes".into(),
        ));
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain("sigma must be positive".into()));
    }
    if lambda.lambda2 < 0.0 {
        return Err(Error::Domain("lambda2 must be non-negative".into()));
    }
    let tol = sigma / sub.n() as f64;
    let x = sub.c.iter().map(|&ck| coordinate_min(ck, lambda, sub, tol)).collect();
    Ok((x, t_of_lambda(lambda.lambda2, sub.a, sub.n())))
}

/// Negated dual function at one point, with its δ-gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEval {
    /// `Ğ(λ) = -G̃(λ)`, to be minimized.
    pub value: f64,
    pub grad: [f64; 2],
    /// Bound on the error of `value` caused by the inexact coordinate minimization.
    pub delta: f64,
    pub x: Vec<f64>,
    pub t: f64,
}

/// Evaluates `Ğ(λ) = -min_{x,t} L(x, t, λ)` at the approximate minimizer; the
/// gradient follows from the Demyanov–Danskin formula.
pub fn dual_value_grad(lambda: DualPoint, sub: &InnerSubproblem, sigma: f64) -> Result<DualEval> {
    let (x, t) = inner_primal_from_dual(lambda, sub, sigma)?;
    let a = sub.a;
    let tol = sigma / sub.n() as f64;
    let mut lagr = t - lambda.lambda2 * t.powf(a / 2.0) - lambda.lambda1;
    let mut sum_x = 0.0;
    let mut sum_xa = 0.0;
    let mut delta = 0.0;
    for (&ck, &xk) in sub.c.iter().zip(&x) {
        lagr += (ck + lambda.lambda1) * xk + lambda.lambda2 * xk.powf(a) + sub.mu_bar * xlogx(xk);
        sum_x += xk;
        sum_xa += xk.powf(a);
        if xk > BISECTION_FLOOR && xk < 1.0 {
            delta += coordinate_derivative(ck, lambda, sub, xk).abs() * tol;
        }
    }
    Ok(DualEval {
        value: -lagr,
        grad: [1.0 - sum_x, t.powf(a / 2.0) - sum_xa],
        delta,
        x,
        t,
    })
}

/// Radius `C = 4||c||_∞ + 4μ̄ ln(2n) + 8` of the region holding the optimal multipliers.
pub fn slater_c(sub: &InnerSubproblem) -> f64 {
    4.0 * norm_inf(&sub.c) + 4.0 * sub.mu_bar * (2.0 * sub.n() as f64).ln() + 8.0
}

/// Outcome of the 2D ellipsoid method.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidResult {
    pub lambda: DualPoint,
    pub value: f64,
    pub iterations: usize,
    /// Whether the accuracy certificate reached the target before the cap.
    pub certified: bool,
    /// Best certified bound on `value - min`.
    pub gap_bound: f64,
    /// Best value after each iteration.
    pub history: Vec<f64>,
}

/// Iteration cap `16 ln(C / eps) + 50`.
pub fn ellipsoid_cap(c: f64, eps: f64) -> usize {
    (16.0 * (c / eps).ln().max(1.0)).ceil() as usize + 50
}

/// Ellipsoid method over `{λ₂ >= 0, |λ₁| + λ₂ <= c}` for a convex function
/// given by value and (δ-)subgradient.
pub fn ellipsoid_minimize<F>(mut f: F, c: f64, eps: f64) -> Result<EllipsoidResult>
where
    F: FnMut(DualPoint) -> Result<(f64, [f64; 2])>,
{
    if !(c > 0.0) || !(eps > 0.0) {
        return Err(Error::Domain("ellipsoid radius and accuracy must be positive".into()));
    }
    let cap = ellipsoid_cap(c, eps);
    let mut center = [0.0, c / 2.0];
    let r2 = 4.0 * c * c;
    let mut p = [[r2, 0.0], [0.0, r2]];
    let mut best: Option<(DualPoint, f64)> = None;
    let mut gap_bound = f64::INFINITY;
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < cap {
        iterations += 1;
        let lam = DualPoint::new(center[0], center[1]);
        let g = if lam.lambda2 < 0.0 {
            [0.0, -1.0]
        } else if lam.norm1() > c {
            [lam.lambda1.signum(), 1.0]
        } else {
            let (v, g) = f(lam)?;
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((lam, v));
            }
            let pg = [p[0][0] * g[0] + p[0][1] * g[1], p[1][0] * g[0] + p[1][1] * g[1]];
            let width = (g[0] * pg[0] + g[1] * pg[1]).max(0.0).sqrt();
            gap_bound = gap_bound.min(width);
            if gap_bound <= eps {
                history.push(best.map_or(f64::INFINITY, |b| b.1));
                break;
            }
            g
        };
        history.push(best.map_or(f64::INFINITY, |b| b.1));
        let pg = [p[0][0] * g[0] + p[0][1] * g[1], p[1][0] * g[0] + p[1][1] * g[1]];
        let gpg = g[0] * pg[0] + g[1] * pg[1];
        if !(gpg > 0.0) {
            break;
        }
        let s = gpg.sqrt();
        let b = [pg[0] / s, pg[1] / s];
        center[0] -= b[0] / 3.0;
        center[1] -= b[1] / 3.0;
        for i in 0..2 {
            for j in 0..2 {
                p[i][j] = 4.0 / 3.0 * (p[i][j] - 2.0 / 3.0 * b[i] * b[j]);
            }
        }
    }
    let (lambda, value) = best.ok_or_else(|| Error::InnerSolver("ellipsoid method found no feasible center".into()))?;
    Ok(EllipsoidResult {
        lambda,
        value,
        iterations,
        certified: gap_bound <= eps,
        gap_bound,
        history,
    })
}

/// Bisection accuracy used for a given outer accuracy.
pub fn inner_sigma(sub: &InnerSubproblem, eps: f64) -> f64 {
    eps / (4.0 * slater_c(sub))
}

/// Minimizes the negated dual of `sub` to accuracy `eps`.
pub fn ellipsoid_2d(sub: &InnerSubproblem, eps: f64) -> Result<EllipsoidResult> {
    let sigma = inner_sigma(sub, eps);
    ellipsoid_minimize(
        |l| dual_value_grad(l, sub, sigma).map(|e| (e.value, e.grad)),
        slater_c(sub),
        eps,
    )
}

/// Primal point recovered from the dual solve.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub x: Vec<f64>,
    pub lambda: DualPoint,
    /// `G̃` at the returned multipliers (a lower bound on the primal optimum up to δ).
    pub dual_value: f64,
    pub iterations: usize,
    pub certified: bool,
    pub delta: f64,
}

/// Solves `sub` through its dual and returns `x(λ_best)` rescaled onto the simplex.
pub fn solve_inner(sub: &InnerSubproblem, eps: f64) -> Result<InnerSolution> {
    let res = ellipsoid_2d(sub, eps)?;
    let sigma = inner_sigma(sub, eps);
    let eval = dual_value_grad(res.lambda, sub, sigma)?;
    let s: f64 = eval.x.iter().sum();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InnerSolver("recovered point collapsed to zero".into()));
    }
    Ok(InnerSolution {
        x: eval.x.iter().map(|v| v / s).collect(),
        lambda: res.lambda,
        dual_value: -res.value,
        iterations: res.iterations,
        certified: res.certified,
        delta: eval.delta,
    })
}

/// Which of the two regimes handles the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsqCase {
    /// Small entropy weight: entropy prox, closed-form steps.
    A,
    /// Large entropy weight: power-norm prox with restarts.
    B,
}

/// `A` iff `mu <= eps / (2 ln n)`.
pub fn classify(mu: f64, eps: f64, n: usize) -> LsqCase {
    if mu <= eps / (2.0 * (n.max(2) as f64).ln()) {
        LsqCase::A
    } else {
        LsqCase::B
    }
}

/// `max_k ||A^(k)||²`, the smoothness constant of `½||Ax-b||²` in the l1 norm.
pub fn lipschitz_1norm(a: &CscMatrix) -> f64 {
    (0..a.cols()).map(|j| a.column_norm_sq(j)).fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct EntropyLsqProblem {
    a: Arc<CscMatrix>,
    b: Arc<Vec<f64>>,
    mu: f64,
    eps: f64,
    case: LsqCase,
}

impl EntropyLsqProblem {
    pub fn new(a: CscMatrix, b: Vec<f64>, mu: f64, eps: f64) -> Result<Self> {
        check_dim(a.rows(), b.len())?;
        if a.cols() == 0 {
            return Err(Error::Domain("matrix has no columns".into()));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::Domain(format!("mu must be non-negative, got {mu}")));
        }
        if !(eps > 0.0) {
            return Err(Error::Domain(format!("eps must be positive, got {eps}")));
        }
        let case = classify(mu, eps, a.cols());
        Ok(Self {
            a: Arc::new(a),
            b: Arc::new(b),
            mu,
            eps,
            case,
        })
    }

    /// Overrides the threshold-based case selection.
    pub fn with_case(mut self, case: LsqCase) -> Self {
        self.case = case;
        self
    }

    pub fn case(&self) -> LsqCase {
        self.case
    }

    pub fn matrix(&self) -> &CscMatrix {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn lipschitz(&self) -> f64 {
        lipschitz_1norm(&self.a)
    }

    /// `(½||Ax-b||², Aᵀ(Ax-b))`.
    pub fn smooth_value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.n(), x.len())?;
        Ok(value_grad(&self.a, &self.b, x))
    }

    /// Full objective including the entropy term.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        let (f, _) = self.smooth_value_grad(x)?;
        Ok(f + self.mu * x.iter().map(|&v| xlogx(v)).sum::<f64>())
    }

    pub fn oracle(&self) -> Arc<FirstOrderOracle> {
        let (a, b) = (self.a.clone(), self.b.clone());
        let (a2, b2) = (self.a.clone(), self.b.clone());
        Arc::new(
            FirstOrderOracle::new(self.n(), move |x| value_grad(&a, &b, x)).with_value(move |x| {
                let r = residual(&a2, &b2, x);
                0.5 * dot(&r, &r)
            }),
        )
    }

    /// The composite problem for a given prox setup (smoothness constant attached).
    pub fn composite_problem(&self, setup: ProxSetup) -> Result<CompositeProblem> {
        CompositeProblem::new(self.oracle(), Composite::entropy(self.mu), setup)?
            .with_lipschitz(self.lipschitz().max(f64::MIN_POSITIVE))?
            .with_strong_convexity(self.mu)
    }

    /// `3 sqrt(L ln n / eps)`, the iteration budget expected in case (a).
    pub fn case_a_iteration_bound(&self) -> f64 {
        3.0 * (self.lipschitz() * (self.n() as f64).ln() / self.eps).sqrt()
    }

    /// `sqrt(L ω_n / μ) ⌈ln(μ/ε)⌉` with `ω_n = 2 ln n`, the case (b) iteration estimate.
    pub fn case_b_iteration_estimate(&self) -> f64 {
        let omega = 2.0 * (self.n() as f64).ln();
        (self.lipschitz() * omega / self.mu).sqrt() * (self.mu / self.eps).ln().ceil().max(1.0)
    }

    pub fn solve(&self) -> Result<RunReport> {
        match self.case {
            LsqCase::A => self.solve_case_a(),
            LsqCase::B => self.solve_case_b(),
        }
    }

    /// FGM with the entropy prox; the entropy term is absorbed by the closed-form steps.
    pub fn solve_case_a(&self) -> Result<RunReport> {
        let problem = self.composite_problem(ProxSetup::entropy(self.n())?)?;
        fgm_solve(&problem, &FgmOptions::new(self.eps))
    }

    /// Restarted FGM with the power-norm prox; each step calls the dual inner solver.
    pub fn solve_case_b(&self) -> Result<RunReport> {
        if !(self.mu > 0.0) {
            return Err(Error::Unsupported("case (b) needs a positive entropy weight".into()));
        }
        let problem = self.composite_problem(ProxSetup::power_norm(self.n())?)?;
        let mut opts = RestartOptions::new(self.eps, RestartLipschitz::Known(problem.lipschitz().unwrap_or(1.0)));
        opts.early_exit = true;
        restart_solve(&problem, &opts)
    }
}

fn residual(a: &CscMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; a.rows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            for (i, v) in a.column(j) {
                r[i] += v * xj;
            }
        }
    }
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }
    r
}

fn value_grad(a: &CscMatrix, b: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
    let r = residual(a, b, x);
    let g = (0..a.cols()).map(|j| a.column(j).map(|(i, v)| v * r[i]).sum()).collect();
    (0.5 * dot(&r, &r), g)
}

/// Seeded random instance: sparse Gaussian `A` (each entry kept with
/// probability `density`, at least one entry per column) and `b = A x̂ + noise`
/// for a random simplex point `x̂`.
pub fn random_instance(m: usize, n: usize, density: f64, seed: u64) -> Result<(CscMatrix, Vec<f64>)> {
    if m == 0 || n == 0 {
        return Err(Error::Domain("instance dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trip = Vec::new();
    for j in 0..n {
        let forced = rng.random_range(0..m);
        for i in 0..m {
            if i == forced || rng.random::<f64>() < density {
                let v: f64 = StandardNormal.sample(&mut rng);
                trip.push((i, j, v));
            }
        }
    }
    let a = CscMatrix::from_triplets(m, n, &trip)?;
    let xs = crate::problem::FeasibleSet::simplex(n).sample(&mut rng);
    let mut b = a.mul_vec(&xs)?;
    for v in &mut b {
        let noise: f64 = StandardNormal.sample(&mut rng);
        *v += 0.1 * noise;
    }
    Ok((a, b))
}
