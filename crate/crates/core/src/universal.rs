//! Adaptive Lipschitz backtracking and the universal method.
//!
//! Each iteration first tries half of the previous constant and doubles it
//! until the gradient step passes the inexact descent test
//! `F(y) <= f(x) + <g, y - x> + L V(y, x) + h(y) + δ`. Because the method only
//! needs `ε`, it adapts to the unknown Hölder exponent of `∇f`.

use crate::error::{Error, Result};
use crate::fgm::{fgm_solve, next_alpha_tau, FgmOptions, FgmState, LipschitzMode, StepOutcome};
use crate::problem::CompositeProblem;
use crate::report::RunReport;

pub const DEFAULT_LIPSCHITZ_CEILING: f64 = 1e30;

/// Slack `δ_{k+1}` allowed in the descent test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaRule {
    /// `ε α_{k+1} / (2 A_{k+1})`.
    Precise,
    /// `½ ε^{3/2} / sqrt(L_{k+1})`.
    Coarse,
    /// A constant slack.
    Fixed(f64),
}

impl DeltaRule {
    pub fn delta(&self, eps: f64, alpha: f64, a_next: f64, l: f64) -> f64 {
        match *self {
            DeltaRule::Precise => eps * alpha / (2.0 * a_next),
            DeltaRule::Coarse => 0.5 * eps.powf(1.5) / l.sqrt(),
            DeltaRule::Fixed(d) => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacktrackConfig {
    pub l0: f64,
    pub delta_rule: DeltaRule,
    pub ceiling: f64,
}

impl Default for BacktrackConfig {
    fn default() -> Self {
        Self {
            l0: 1.0,
            delta_rule: DeltaRule::Precise,
            ceiling: DEFAULT_LIPSCHITZ_CEILING,
        }
    }
}

impl BacktrackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l0 > 0.0) || !self.l0.is_finite() {
            return Err(Error::Domain(format!("L0 must be positive, got {}", self.l0)));
        }
        if !(self.ceiling > self.l0) {
            return Err(Error::Domain("Lipschitz ceiling must exceed L0".into()));
        }
        if let DeltaRule::Fixed(d) = self.delta_rule {
            if !(d >= 0.0) {
                return Err(Error::Domain("fixed delta must be non-negative".into()));
            }
        }
        Ok(())
    }
}

/// Descent test with a relative allowance for rounding.
pub fn accepts(f_y: f64, model: f64, delta: f64) -> bool {
    f_y <= model + delta + 1e-12 * (1.0 + model.abs())
}

/// Result of backtracking at a fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct Backtrack {
    pub lipschitz: f64,
    pub y: Vec<f64>,
    pub f_y: f64,
    pub model_value: f64,
    pub fval_calls: usize,
}

/// Backtracking at a fixed `x_next`: one gradient call, then one function
/// value per trial, starting from `l_start / 2`.
pub fn backtrack<D>(
    problem: &CompositeProblem,
    x_next: &[f64],
    l_start: f64,
    delta: D,
    ceiling: f64,
) -> Result<Backtrack>
where
    D: Fn(f64) -> f64,
{
    if !(l_start > 0.0) {
        return Err(Error::Domain(format!("L must be positive, got {l_start}")));
    }
    let (fx, g) = problem.oracle().eval(x_next);
    let mut l = l_start / 2.0;
    let mut calls = 0;
    loop {
        let step = problem.grad_step(x_next, &g, fx, l)?;
        let f_y = problem.objective(&step.x);
        calls += 1;
        if accepts(f_y, step.model_value, delta(l)) {
            return Ok(Backtrack {
                lipschitz: l,
                y: step.x,
                f_y,
                model_value: step.model_value,
                fval_calls: calls,
            });
        }
        l *= 2.0;
        if l > ceiling {
            return Err(Error::LipschitzCeiling {
                lipschitz: l,
                ceiling,
                iteration: 0,
            });
        }
    }
}

/// One universal iteration. Every trial recomputes `α`, `τ`, the coupled
/// point and its gradient for the candidate `L`. Returns `None` when the
/// gradient budget runs out before a trial is accepted.
pub(crate) fn adaptive_step(
    state: &mut FgmState,
    problem: &CompositeProblem,
    eps: f64,
    cfg: &BacktrackConfig,
    budget: Option<usize>,
) -> Result<Option<StepOutcome>> {
    let mut l = state.lipschitz / 2.0;
    let mut trials = 0;
    let mut inner = 0;
    loop {
        if budget.is_some_and(|b| trials >= b) {
            return Ok(None);
        }
        let (alpha, tau) = next_alpha_tau(l, state.alpha, state.lipschitz);
        let x = state.coupled(tau);
        let (fx, g) = problem.oracle().eval(&x);
        trials += 1;
        let ystep = problem.grad_step(&x, &g, fx, l)?;
        inner += ystep.inner_iterations;
        let f_y = problem.objective(&ystep.x);
        let delta = cfg.delta_rule.delta(eps, alpha, state.a_sum + alpha, l);
        if accepts(f_y, ystep.model_value, delta) {
            inner += state.commit(problem, x, fx, &g, alpha, l, delta, ystep)?;
            return Ok(Some(StepOutcome {
                f_y: Some(f_y),
                inner_iterations: inner,
                lipschitz: l,
                trials,
            }));
        }
        l *= 2.0;
        if l > cfg.ceiling {
            return Err(Error::LipschitzCeiling {
                lipschitz: l,
                ceiling: cfg.ceiling,
                iteration: state.k + 1,
            });
        }
    }
}

/// FGM with backtracking, stopped by the certificate gap.
pub fn universal_solve(problem: &CompositeProblem, eps: f64, cfg: BacktrackConfig) -> Result<RunReport> {
    fgm_solve(problem, &FgmOptions::new(eps).with_mode(LipschitzMode::Adaptive(cfg)))
}
