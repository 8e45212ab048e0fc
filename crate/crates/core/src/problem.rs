//! Composite problems `F(x) = f(x) + h(x) -> min over Q`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, xlogx};
use crate::oracle::{FirstOrderOracle, InexactOracle};
use crate::prox::{self, ProxSetup, ProxStep};

/// Feasible set descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    /// Unit simplex `{x >= 0, sum x = 1}`.
    Simplex { n: usize },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Whole { n: usize },
}

impl FeasibleSet {
    pub fn simplex(n: usize) -> Self {
        FeasibleSet::Simplex { n }
    }

    pub fn unit_box(n: usize) -> Self {
        FeasibleSet::Box {
            lower: vec![-1.0; n],
            upper: vec![1.0; n],
        }
    }

    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Domain("box needs lower <= upper".into()));
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Simplex { n } | FeasibleSet::Whole { n } => *n,
            FeasibleSet::Box { lower, .. } => lower.len(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, FeasibleSet::Whole { .. })
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            FeasibleSet::Simplex { .. } => {
                x.iter().all(|&v| v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol
            }
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            FeasibleSet::Whole { .. } => true,
        }
    }

    /// Euclidean projection.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        match self {
            FeasibleSet::Simplex { .. } => project_simplex(v),
            FeasibleSet::Box { lower, upper } => v
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(x, (l, u))| x.clamp(*l, *u))
                .collect(),
            FeasibleSet::Whole { .. } => v.to_vec(),
        }
    }

    /// A minimizer of `<lin, x>` over the set.
    pub fn linear_min(&self, lin: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeasibleSet::Simplex { n } => {
                let mut best = 0;
                for (i, v) in lin.iter().enumerate() {
                    if *v < lin[best] {
                        best = i;
                    }
                }
                let mut x = vec![0.0; *n];
                x[best] = 1.0;
                Ok(x)
            }
            FeasibleSet::Box { lower, upper } => Ok(lin
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(c, (l, u))| if *c > 0.0 { *l } else { *u })
                .collect()),
            FeasibleSet::Whole { n } => {
                if lin.iter().all(|c| *c == 0.0) {
                    Ok(vec![0.0; *n])
                } else {
                    Err(Error::Unbounded)
                }
            }
        }
    }

    /// A random point: uniform on the simplex and the box, standard normal otherwise.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            FeasibleSet::Simplex { n } => {
                let e: Vec<f64> = (0..*n).map(|_| Exp1.sample(rng)).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            }
            FeasibleSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| if l == u { *l } else { rng.random_range(*l..=*u) })
                .collect(),
            FeasibleSet::Whole { n } => (0..*n).map(|_| StandardNormal.sample(rng)).collect(),
        }
    }

    /// Barycenter of the simplex, midpoint of the box, origin of the space.
    pub fn default_center(&self) -> Vec<f64> {
        match self {
            FeasibleSet::Simplex { n } => vec![1.0 / *n as f64; *n],
            FeasibleSet::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect()
            }
            FeasibleSet::Whole { n } => vec![0.0; *n],
        }
    }
}

/// Euclidean projection onto the unit simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// User-supplied simple term with a closed-form model minimizer.
pub trait ProxHook: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64]) -> f64;

    /// `argmin_{x in Q} <lin, x> + prox_weight * d(x) + h(x)`, where `d` is the
    /// setup's uncentered prox function.
    fn minimize_model(&self, lin: &[f64], prox_weight: f64, setup: &ProxSetup) -> Result<Vec<f64>>;
}

/// `weight * ||x||_1` on the whole space with the Euclidean setup (soft thresholding).
#[derive(Debug, Clone, Copy)]
pub struct L1Penalty {
    pub weight: f64,
}

impl ProxHook for L1Penalty {
    fn value(&self, x: &[f64]) -> f64 {
        self.weight * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn minimize_model(&self, lin: &[f64], prox_weight: f64, setup: &ProxSetup) -> Result<Vec<f64>> {
        if !matches!(setup.kernel(), prox::ProxKernel::Euclidean)
            || !matches!(setup.domain(), FeasibleSet::Whole { .. })
        {
            return Err(Error::Unsupported(
                "L1 penalty prox is implemented for the Euclidean setup on the whole space".into(),
            ));
        }
        if !(prox_weight > 0.0) {
            return Err(Error::Unbounded);
        }
        let thr = self.weight / prox_weight;
        Ok(lin
            .iter()
            .map(|c| {
                let v = -c / prox_weight;
                v.signum() * (v.abs() - thr).max(0.0)
            })
            .collect())
    }
}

/// `gamma * V(x, center)`: the term added by regularization.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxPenalty {
    pub weight: f64,
    pub center: Vec<f64>,
}

/// The simple part `h` of the objective.
#[derive(Debug, Clone, Default)]
pub struct Composite {
    /// Weight of `sum x ln x`.
    pub entropy_weight: f64,
    pub penalty: Option<ProxPenalty>,
    pub custom: Option<Arc<dyn ProxHook>>,
}

impl Composite {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn entropy(weight: f64) -> Self {
        Self {
            entropy_weight: weight,
            ..Self::default()
        }
    }

    pub fn custom(hook: Arc<dyn ProxHook>) -> Self {
        Self {
            custom: Some(hook),
            ..Self::default()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entropy_weight == 0.0 && self.penalty.is_none() && self.custom.is_none()
    }

    pub fn value(&self, x: &[f64], setup: &ProxSetup) -> f64 {
        let mut v = 0.0;
        if self.entropy_weight != 0.0 {
            v += self.entropy_weight * x.iter().map(|&t| xlogx(t)).sum::<f64>();
        }
        if let Some(p) = &self.penalty {
            v += p.weight * setup.bregman_unchecked(x, &p.center);
        }
        if let Some(c) = &self.custom {
            v += c.value(x);
        }
        v
    }
}

/// `F = f + h` over the prox setup's domain, with optional smoothness and
/// strong-convexity data.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    oracle: Arc<FirstOrderOracle>,
    composite: Composite,
    setup: ProxSetup,
    mu: f64,
    lipschitz: Option<f64>,
    delta: f64,
}

impl CompositeProblem {
    pub fn new(oracle: Arc<FirstOrderOracle>, composite: Composite, setup: ProxSetup) -> Result<Self> {
        check_dim(setup.dim(), oracle.dim())?;
        if composite.entropy_weight < 0.0 {
            return Err(Error::Domain("entropy weight must be non-negative".into()));
        }
        if composite.entropy_weight > 0.0 && !matches!(setup.domain(), FeasibleSet::Simplex { .. }) {
            return Err(Error::Unsupported("entropy composite requires the simplex".into()));
        }
        Ok(Self {
            oracle,
            composite,
            setup,
            mu: 0.0,
            lipschitz: None,
            delta: 0.0,
        })
    }

    pub fn from_inexact(oracle: &InexactOracle, composite: Composite, setup: ProxSetup) -> Result<Self> {
        let mut p = Self::new(oracle.inner().clone(), composite, setup)?;
        p.lipschitz = Some(oracle.lipschitz());
        p.delta = oracle.delta();
        Ok(p)
    }

    pub fn with_lipschitz(mut self, l: f64) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::Domain(format!("Lipschitz constant must be positive, got {l}")));
        }
        self.lipschitz = Some(l);
        Ok(self)
    }

    /// Declares `F` to be `mu`-strongly convex in the setup's norm.
    pub fn with_strong_convexity(mut self, mu: f64) -> Result<Self> {
        if !(mu >= 0.0) {
            return Err(Error::Domain(format!("mu must be non-negative, got {mu}")));
        }
        self.mu = mu;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.setup.dim()
    }

    pub fn oracle(&self) -> &Arc<FirstOrderOracle> {
        &self.oracle
    }

    pub fn composite(&self) -> &Composite {
        &self.composite
    }

    pub fn setup(&self) -> &ProxSetup {
        &self.setup
    }

    pub fn feasible_set(&self) -> &FeasibleSet {
        self.setup.domain()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    /// Oracle inexactness δ (zero for exact oracles).
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn h(&self, x: &[f64]) -> f64 {
        self.composite.value(x, &self.setup)
    }

    /// `F(x)`; one function-value call.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.oracle.value(x) + self.h(x)
    }

    /// Same problem with the prox setup re-centered at `center`.
    pub fn recentered(&self, center: &[f64]) -> Result<Self> {
        let mut p = self.clone();
        p.setup = self.setup.recentered(center)?;
        Ok(p)
    }

    pub(crate) fn with_composite(mut self, composite: Composite) -> Self {
        self.composite = composite;
        self
    }

    pub fn mirror_step(&self, z: &[f64], g: &[f64], alpha: f64) -> Result<ProxStep> {
        prox::mirror_step(&self.setup, &self.composite, z, g, alpha)
    }

    pub fn grad_step(&self, x: &[f64], g: &[f64], fx: f64, l: f64) -> Result<prox::GradStep> {
        prox::grad_step(&self.setup, &self.composite, x, g, fx, l)
    }

    /// `min_{x in Q} <lin, x> + h(x)` and a minimizer.
    pub fn minimize_linear_plus_h(&self, lin: &[f64]) -> Result<(f64, Vec<f64>)> {
        let step = prox::minimize_model(&self.setup, &self.composite, lin, 0.0)?;
        let v = dot(lin, &step.x) + self.h(&step.x);
        Ok((v, step.x))
    }
}
