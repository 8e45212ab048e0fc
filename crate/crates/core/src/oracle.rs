//! First-order oracles and the (δ, L) inexact-oracle contract.
//!
//! A (δ, L)-oracle at `x` returns a pair `(f_δ(x), g_δ(x))` such that for all
//! `y` in the feasible set
//!
//! ```text
//! 0 <= f(y) - f_δ(x) - <g_δ(x), y - x> <= L/2 ||y - x||^2 + δ.
//! ```
//!
//! A function with Hölder-continuous gradient, `||∇f(y) - ∇f(x)||_* <= L_ν ||y - x||^ν`,
//! admits such an oracle for every `δ > 0`, with `L` given by [`effective_lipschitz`].

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{dot, Norm};

type ValueGradFn = dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync;
type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Exact oracle for a smooth (or subdifferentiable) function, with call counters.
///
/// Evaluation must be pure; the counters are atomic so one oracle can be shared
/// across threads.
pub struct FirstOrderOracle {
    dim: usize,
    value_grad: Box<ValueGradFn>,
    value_only: Option<Box<ValueFn>>,
    grad_calls: AtomicUsize,
    fval_calls: AtomicUsize,
}

impl fmt::Debug for FirstOrderOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FirstOrderOracle")
            .field("dim", &self.dim)
            .field("grad_calls", &self.grad_calls())
            .field("fval_calls", &self.fval_calls())
            .finish()
    }
}

impl FirstOrderOracle {
    pub fn new<F>(dim: usize, value_grad: F) -> Self
    where
        F: Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync + 'static,
    {
        Self {
            dim,
            value_grad: Box::new(value_grad),
            value_only: None,
            grad_calls: AtomicUsize::new(0),
            fval_calls: AtomicUsize::new(0),
        }
    }

    /// Supplies a cheaper value-only evaluation used by [`FirstOrderOracle::value`].
    pub fn with_value<V>(mut self, value: V) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.value_only = Some(Box::new(value));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value and gradient; counts as one gradient call.
    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        debug_assert_eq!(x.len(), self.dim);
        self.grad_calls.fetch_add(1, Ordering::Relaxed);
        (self.value_grad)(x)
    }

    /// Value only; counts as one function-value call.
    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.fval_calls.fetch_add(1, Ordering::Relaxed);
        match &self.value_only {
            Some(v) => v(x),
            None => (self.value_grad)(x).0,
        }
    }

    pub fn grad_calls(&self) -> usize {
        self.grad_calls.load(Ordering::Relaxed)
    }

    pub fn fval_calls(&self) -> usize {
        self.fval_calls.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.grad_calls.store(0, Ordering::Relaxed);
        self.fval_calls.store(0, Ordering::Relaxed);
    }
}

/// Output of a (δ, L)-oracle at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct InexactOracleOutput {
    pub f_val: f64,
    pub g: Vec<f64>,
    pub delta: f64,
    pub lipschitz: f64,
}

/// An oracle together with the (δ, L) pair it certifies.
#[derive(Debug, Clone)]
pub struct InexactOracle {
    inner: Arc<FirstOrderOracle>,
    delta: f64,
    lipschitz: f64,
}

impl InexactOracle {
    pub fn new(inner: Arc<FirstOrderOracle>, delta: f64, lipschitz: f64) -> Result<Self> {
        if !(delta >= 0.0) || !(lipschitz > 0.0) || !lipschitz.is_finite() {
            return Err(Error::Domain(format!(
                "need delta >= 0 and finite L > 0, got delta = {delta}, L = {lipschitz}"
            )));
        }
        Ok(Self {
            inner,
            delta,
            lipschitz,
        })
    }

    /// An exact oracle for an `L`-smooth function is a (0, L)-oracle.
    pub fn exact(inner: Arc<FirstOrderOracle>, lipschitz: f64) -> Result<Self> {
        Self::new(inner, 0.0, lipschitz)
    }

    pub fn query(&self, x: &[f64]) -> InexactOracleOutput {
        let (f_val, g) = self.inner.eval(x);
        InexactOracleOutput {
            f_val,
            g,
            delta: self.delta,
            lipschitz: self.lipschitz,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn inner(&self) -> &Arc<FirstOrderOracle> {
        &self.inner
    }
}

/// Hölder class of the gradient: exponent `nu` in `[0, 1]` and constant `l_nu > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderClass {
    nu: f64,
    l_nu: f64,
}

impl HolderClass {
    pub fn new(nu: f64, l_nu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&nu) || !(l_nu > 0.0) || !l_nu.is_finite() {
            return Err(Error::Domain(format!(
                "Hölder class needs nu in [0, 1] and L_nu > 0, got nu = {nu}, L_nu = {l_nu}"
            )));
        }
        Ok(Self { nu, l_nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn l_nu(&self) -> f64 {
        self.l_nu
    }
}

/// Smoothness constant of the (δ, L)-model of a Hölder-smooth function:
/// `L = L_ν [ L_ν/(2δ) · (1-ν)/(1+ν) ]^((1-ν)/(1+ν))`.
///
/// Non-increasing in `delta`; independent of it when `ν = 1`.
pub fn effective_lipschitz(hc: HolderClass, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    let nu = hc.nu;
    let expo = (1.0 - nu) / (1.0 + nu);
    if expo == 0.0 {
        return Ok(hc.l_nu);
    }
    let base = hc.l_nu / (2.0 * delta) * expo;
    Ok(hc.l_nu * base.powf(expo))
}

/// Power of `N` in the admissible oracle error: `δ ~ ε / N^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaPower {
    /// Gradient-method regime, `δ ~ ε`.
    Zero,
    /// Fast-gradient regime, `δ ~ ε / N`.
    One,
}

/// Default constant in [`delta_schedule`].
pub const DEFAULT_DELTA_CONSTANT: f64 = 0.5;

/// Admissible oracle error `c · ε / N^p`.
pub fn delta_schedule(eps: f64, n: usize, p: DeltaPower, c: f64) -> Result<f64> {
    if !(eps > 0.0) || n == 0 || !(c > 0.0) {
        return Err(Error::Domain(format!(
            "delta schedule needs eps > 0, N >= 1, c > 0 (eps = {eps}, N = {n}, c = {c})"
        )));
    }
    Ok(match p {
        DeltaPower::Zero => c * eps,
        DeltaPower::One => c * eps / n as f64,
    })
}

/// Treats the exact oracle of a Hölder-smooth function as a (δ, L)-oracle.
pub fn wrap_holder_as_inexact(
    oracle: Arc<FirstOrderOracle>,
    hc: HolderClass,
    delta: f64,
) -> Result<InexactOracle> {
    let l = effective_lipschitz(hc, delta)?;
    InexactOracle::new(oracle, delta, l)
}

/// Largest observed violations of the two sides of the oracle inequality.
/// Positive values mean the contract failed on the sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractReport {
    pub max_lower_violation: f64,
    pub max_upper_violation: f64,
    pub pairs: usize,
}

impl ContractReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_lower_violation <= tol && self.max_upper_violation <= tol
    }
}

/// Samples `num_pairs` pairs `(x, y)` from `sampler` and measures how far the
/// oracle's claimed (δ, L) is from the truth given by `true_f`.
pub fn verify_dl_oracle<T, S>(
    oracle: &InexactOracle,
    true_f: T,
    mut sampler: S,
    num_pairs: usize,
    norm: Norm,
) -> ContractReport
where
    T: Fn(&[f64]) -> f64,
    S: FnMut() -> Vec<f64>,
{
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for _ in 0..num_pairs {
        let x = sampler();
        let y = sampler();
        let out = oracle.query(&x);
        let diff: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let gap = true_f(&y) - out.f_val - dot(&out.g, &diff);
        let r = norm.of(&diff);
        lower = lower.max(-gap);
        upper = upper.max(gap - 0.5 * out.lipschitz * r * r - out.delta);
    }
    ContractReport {
        max_lower_violation: lower,
        max_upper_violation: upper,
        pairs: num_pairs,
    }
}
