//! Prox setups and the composite mirror / gradient steps they induce.
//!
//! Every step reduces to one model minimization over the feasible set
//!
//! ```text
//! argmin_x  <lin, x> + q * d(x) + h(x)
//! ```
//!
//! where `d` is the setup's (uncentered) prox function. Euclidean and entropy
//! setups solve it in closed form; the power-norm setup hands it to the dual
//! inner solver in [`crate::entropy_lsq`].

use rand::Rng;

use crate::entropy_lsq::{solve_inner, InnerSubproblem};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, xlogx, Norm};
use crate::problem::{Composite, FeasibleSet};

/// Floor applied to simplex coordinates before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-300;

/// Factor applied to the power-norm prox function so that it is 1-strongly
/// convex in the l1 norm on the simplex (unscaled it is only 1/e-strongly convex).
pub const POWER_NORM_SCALE: f64 = std::f64::consts::E;

/// Default accuracy of the dual inner solver used by power-norm steps.
pub const DEFAULT_INNER_TOLERANCE: f64 = 1e-11;

/// Exponent `a` of the power-norm prox function `||x||_a^2 / (2(a-1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerNormParams {
    a: f64,
    n: usize,
}

impl PowerNormParams {
    /// `a = 2 ln n / (2 ln n - 1)`, which lies in `(1, 2)` for `n >= 3`.
    pub fn for_dimension(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Domain(format!("power-norm setup needs n >= 3, got {n}")));
        }
        let l = (n as f64).ln();
        Ok(Self {
            a: 2.0 * l / (2.0 * l - 1.0),
            n,
        })
    }

    pub fn with_exponent(a: f64, n: usize) -> Result<Self> {
        if !(a > 1.0 && a < 2.0) {
            return Err(Error::Domain(format!("exponent must lie in (1, 2), got {a}")));
        }
        Ok(Self { a, n })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Value and gradient of `||x||_a^2 / (2(a-1))` for `x >= 0`; zero coordinates
/// contribute nothing to the gradient.
pub fn powernorm_d(params: &PowerNormParams, x: &[f64]) -> (f64, Vec<f64>) {
    let a = params.a;
    let s: f64 = x.iter().map(|&v| if v > 0.0 { v.powf(a) } else { 0.0 }).sum();
    if s == 0.0 {
        return (0.0, vec![0.0; x.len()]);
    }
    let value = s.powf(2.0 / a) / (2.0 * (a - 1.0));
    let coef = s.powf(2.0 / a - 1.0) / (a - 1.0);
    let grad = x
        .iter()
        .map(|&v| if v > 0.0 { coef * v.powf(a - 1.0) } else { 0.0 })
        .collect();
    (value, grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxKernel {
    /// `d(x) = ||x||_2^2 / 2`.
    Euclidean,
    /// `d(x) = sum x ln x - x` on the simplex.
    Entropy,
    /// `d(x) = scale * ||x||_a^2 / (2(a-1))` on the simplex.
    PowerNorm { params: PowerNormParams, scale: f64 },
}

/// A prox function together with its norm, domain, center and constants.
///
/// The centered prox function is `d(x) = V(x, center)`, so `d(center) = 0`,
/// `∇d(center) = 0` and `d >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxSetup {
    kernel: ProxKernel,
    norm: Norm,
    domain: FeasibleSet,
    center: Vec<f64>,
    omega_n: f64,
    r2_bound: f64,
    inner_tol: f64,
}

/// Result of a mirror step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxStep {
    pub x: Vec<f64>,
    /// Iterations spent in an inner solver (zero for closed-form steps).
    pub inner_iterations: usize,
}

/// Result of a proximal gradient step at `x̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradStep {
    pub x: Vec<f64>,
    /// `f(x̄) + <∇f(x̄), x - x̄> + L V(x, x̄) + h(x)` at the returned point.
    pub model_value: f64,
    pub inner_iterations: usize,
}

impl ProxSetup {
    /// Euclidean setup on any domain; `center` defaults to the domain's center.
    pub fn euclidean(domain: FeasibleSet, center: Option<Vec<f64>>) -> Result<Self> {
        let center = center.unwrap_or_else(|| domain.default_center());
        Self::build(ProxKernel::Euclidean, Norm::L2, domain, center, 1.0)
    }

    /// Entropy setup on the simplex, centered at the barycenter.
    pub fn entropy(n: usize) -> Result<Self> {
        Self::entropy_centered(vec![1.0 / n as f64; n])
    }

    pub fn entropy_centered(center: Vec<f64>) -> Result<Self> {
        let n = center.len();
        let omega = 2.0 * (n.max(2) as f64).ln();
        Self::build(ProxKernel::Entropy, Norm::L1, FeasibleSet::simplex(n), center, omega)
    }

    /// Power-norm setup on the simplex, centered at the barycenter.
    pub fn power_norm(n: usize) -> Result<Self> {
        let params = PowerNormParams::for_dimension(n)?;
        let kernel = ProxKernel::PowerNorm {
            params,
            scale: POWER_NORM_SCALE,
        };
        let omega = 2.0 * (n as f64).ln();
        Self::build(kernel, Norm::L1, FeasibleSet::simplex(n), vec![1.0 / n as f64; n], omega)
    }

    fn build(kernel: ProxKernel, norm: Norm, domain: FeasibleSet, center: Vec<f64>, omega_n: f64) -> Result<Self> {
        check_dim(domain.dim(), center.len())?;
        if !domain.contains(&center, 1e-9) {
            return Err(Error::Domain("prox center must lie in the domain".into()));
        }
        if !matches!(kernel, ProxKernel::Euclidean) && center.iter().any(|&c| c <= 0.0) {
            return Err(Error::Domain("simplex prox center must be strictly positive".into()));
        }
        let mut s = Self {
            kernel,
            norm,
            domain,
            center,
            omega_n,
            r2_bound: 0.0,
            inner_tol: DEFAULT_INNER_TOLERANCE,
        };
        s.r2_bound = s.compute_r2_bound();
        Ok(s)
    }

    /// `max_{x in Q} V(x, center)`; infinite on unbounded domains.
    fn compute_r2_bound(&self) -> f64 {
        match (&self.kernel, &self.domain) {
            (_, FeasibleSet::Whole { .. }) => f64::INFINITY,
            (ProxKernel::Euclidean, FeasibleSet::Box { lower, upper }) => {
                0.5 * lower
                    .iter()
                    .zip(upper)
                    .zip(&self.center)
                    .map(|((l, u), c)| (u - c).abs().max((c - l).abs()).powi(2))
                    .sum::<f64>()
            }
            // V(., center) is convex, so its maximum over the simplex sits at a vertex.
            (_, FeasibleSet::Simplex { n }) => (0..*n)
                .map(|i| {
                    let mut e = vec![0.0; *n];
                    e[i] = 1.0;
                    self.bregman_unchecked(&e, &self.center)
                })
                .fold(0.0, f64::max),
            (_, FeasibleSet::Box { .. }) => f64::INFINITY,
        }
    }

    /// Same kernel and constants, new center; the R² bound is recomputed.
    pub fn recentered(&self, center: &[f64]) -> Result<Self> {
        let mut c = center.to_vec();
        if !matches!(self.kernel, ProxKernel::Euclidean) {
            for v in &mut c {
                *v = v.max(LOG_FLOOR);
            }
        }
        let mut s = Self::build(self.kernel, self.norm, self.domain.clone(), c, self.omega_n)?;
        s.inner_tol = self.inner_tol;
        Ok(s)
    }

    pub fn with_omega(mut self, omega_n: f64) -> Result<Self> {
        if !(omega_n >= 1.0) {
            return Err(Error::Domain(format!("omega_n must be >= 1, got {omega_n}")));
        }
        self.omega_n = omega_n;
        Ok(self)
    }

    pub fn with_inner_tolerance(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::Domain("inner tolerance must be positive".into()));
        }
        self.inner_tol = tol;
        Ok(self)
    }

    pub fn kernel(&self) -> &ProxKernel {
        &self.kernel
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn domain(&self) -> &FeasibleSet {
        &self.domain
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn omega_n(&self) -> f64 {
        self.omega_n
    }

    /// Upper bound on `V(x, center)` over the domain.
    pub fn r2_bound(&self) -> f64 {
        self.r2_bound
    }

    pub fn inner_tolerance(&self) -> f64 {
        self.inner_tol
    }

    /// Uncentered prox function.
    pub fn raw_value(&self, x: &[f64]) -> f64 {
        match &self.kernel {
            ProxKernel::Euclidean => 0.5 * dot(x, x),
            ProxKernel::Entropy => x.iter().map(|&v| xlogx(v) - v).sum(),
            ProxKernel::PowerNorm { params, scale } => scale * powernorm_d(params, x).0,
        }
    }

    /// Gradient of the uncentered prox function (logs floored at [`LOG_FLOOR`]).
    pub fn raw_grad(&self, x: &[f64]) -> Vec<f64> {
        match &self.kernel {
            ProxKernel::Euclidean => x.to_vec(),
            ProxKernel::Entropy => x.iter().map(|&v| v.max(LOG_FLOOR).ln()).collect(),
            ProxKernel::PowerNorm { params, scale } => {
                powernorm_d(params, x).1.into_iter().map(|g| scale * g).collect()
            }
        }
    }

    /// Bregman distance `V(x, z) = d(x) - d(z) - <∇d(z), x - z>`.
    pub fn bregman(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), z.len())?;
        if matches!(self.kernel, ProxKernel::Entropy) && z.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain(
                "entropy Bregman distance needs a strictly positive second argument".into(),
            ));
        }
        Ok(self.bregman_unchecked(x, z))
    }

    /// As [`ProxSetup::bregman`], returning `+inf` where the distance is undefined.
    pub(crate) fn bregman_unchecked(&self, x: &[f64], z: &[f64]) -> f64 {
        match &self.kernel {
            ProxKernel::Euclidean => 0.5 * x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            ProxKernel::Entropy => {
                let mut v = 0.0;
                for (&xi, &zi) in x.iter().zip(z) {
                    if xi <= 0.0 {
                        v += zi;
                    } else if zi <= 0.0 {
                        return f64::INFINITY;
                    } else {
                        v += xi * (xi / zi).ln() - xi + zi;
                    }
                }
                v.max(0.0)
            }
            ProxKernel::PowerNorm { .. } => {
                let gz = self.raw_grad(z);
                let lin: f64 = gz.iter().zip(x.iter().zip(z)).map(|(g, (a, b))| g * (a - b)).sum();
                (self.raw_value(x) - self.raw_value(z) - lin).max(0.0)
            }
        }
    }

    /// Centered prox function `d(x) = V(x, center)`.
    pub fn d(&self, x: &[f64]) -> f64 {
        self.bregman_unchecked(x, &self.center)
    }

    pub fn grad_d(&self, x: &[f64]) -> Vec<f64> {
        let gc = self.raw_grad(&self.center);
        self.raw_grad(x).iter().zip(&gc).map(|(a, b)| a - b).collect()
    }
}

/// `argmin_{simplex} <lin, x> + weight * sum x ln x`: a softmax of `-lin / weight`.
pub(crate) fn entropy_softmin(lin: &[f64], weight: f64) -> Vec<f64> {
    let m = lin.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let e: Vec<f64> = lin.iter().map(|v| (-(v - m) / weight).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| (v / s).max(LOG_FLOOR)).collect()
}

/// `argmin_{x in Q} <lin, x> + prox_weight * d(x) + h(x)` for the setup's
/// uncentered prox function `d`.
pub fn minimize_model(setup: &ProxSetup, h: &Composite, lin: &[f64], prox_weight: f64) -> Result<ProxStep> {
    check_dim(setup.dim(), lin.len())?;
    if !(prox_weight >= 0.0) {
        return Err(Error::Domain(format!("prox weight must be non-negative, got {prox_weight}")));
    }
    // gamma V(x, c) = gamma d(x) - gamma <∇d(c), x> + const
    let mut lin = lin.to_vec();
    let mut q = prox_weight;
    if let Some(p) = &h.penalty {
        let gc = setup.raw_grad(&p.center);
        for (l, g) in lin.iter_mut().zip(&gc) {
            *l -= p.weight * g;
        }
        q += p.weight;
    }
    let w = h.entropy_weight;
    if let Some(hook) = &h.custom {
        if w != 0.0 {
            return Err(Error::Unsupported("custom composite combined with entropy".into()));
        }
        let x = hook.minimize_model(&lin, q, setup)?;
        return Ok(ProxStep { x, inner_iterations: 0 });
    }
    let closed = |x: Vec<f64>| Ok(ProxStep { x, inner_iterations: 0 });
    if q == 0.0 {
        return if w > 0.0 {
            closed(entropy_softmin(&lin, w))
        } else {
            closed(setup.domain().linear_min(&lin)?)
        };
    }
    match &setup.kernel {
        ProxKernel::Euclidean => {
            if w > 0.0 {
                return Err(Error::Unsupported(
                    "entropy composite has no closed-form step in the Euclidean setup".into(),
                ));
            }
            let v: Vec<f64> = lin.iter().map(|c| -c / q).collect();
            closed(setup.domain().project(&v))
        }
        ProxKernel::Entropy => closed(entropy_softmin(&lin, q + w)),
        ProxKernel::PowerNorm { params, scale } => {
            if !(w > 0.0) {
                return Err(Error::Unsupported(
                    "power-norm steps need a positive entropy weight (dual inner solver)".into(),
                ));
            }
            // Divide through by the coefficient of ||x||_a^2.
            let beta = q * scale / (2.0 * (params.a() - 1.0));
            let c: Vec<f64> = lin.iter().map(|v| v / beta).collect();
            let sub = InnerSubproblem::new(c, w / beta, params.a())?;
            let sol = solve_inner(&sub, setup.inner_tolerance())?;
            Ok(ProxStep {
                x: sol.x,
                inner_iterations: sol.iterations,
            })
        }
    }
}

/// `argmin_{x in Q} <g, x - z> + V(x, z) / alpha + h(x)`.
pub fn mirror_step(setup: &ProxSetup, h: &Composite, z: &[f64], g: &[f64], alpha: f64) -> Result<ProxStep> {
    check_dim(setup.dim(), z.len())?;
    check_dim(setup.dim(), g.len())?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("step size must be positive, got {alpha}")));
    }
    let gz = setup.raw_grad(z);
    let lin: Vec<f64> = g.iter().zip(&gz).map(|(gi, di)| gi - di / alpha).collect();
    minimize_model(setup, h, &lin, 1.0 / alpha)
}

/// Proximal gradient step `argmin f(x̄) + <∇f(x̄), x - x̄> + L V(x, x̄) + h(x)`.
pub fn grad_step(setup: &ProxSetup, h: &Composite, x: &[f64], grad_fx: &[f64], fx: f64, l: f64) -> Result<GradStep> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::Domain(format!("L must be positive, got {l}")));
    }
    let step = mirror_step(setup, h, x, grad_fx, 1.0 / l)?;
    let diff: f64 = grad_fx.iter().zip(step.x.iter().zip(x)).map(|(g, (a, b))| g * (a - b)).sum();
    let model_value = fx + diff + l * setup.bregman_unchecked(&step.x, x) + h.value(&step.x, setup);
    Ok(GradStep {
        x: step.x,
        model_value,
        inner_iterations: step.inner_iterations,
    })
}

/// Empirical `max 2 V(x, x0) / ||x - x0||^2` over `samples` random points of the domain.
pub fn omega_estimate<R: Rng + ?Sized>(setup: &ProxSetup, samples: usize, rng: &mut R) -> f64 {
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let x = setup.domain().sample(rng);
        let r = setup.norm().dist(&x, setup.center());
        if r > 1e-12 {
            best = best.max(2.0 * setup.d(&x) / (r * r));
        }
    }
    best
}
