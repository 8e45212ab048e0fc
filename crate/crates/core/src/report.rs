//! Run reports: per-iteration history and terminal status.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    BudgetExhausted,
    Failed,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::BudgetExhausted => "budget_exhausted",
            Status::Failed => "failed",
        })
    }
}

/// One row of the convergence history. Counters are cumulative since the start of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub grad_calls: usize,
    pub fval_calls: usize,
    pub sample_calls: usize,
    /// `F(y^k)`.
    pub f_value: f64,
    /// Certificate gap (infinite where no certificate is available).
    pub gap: f64,
    pub lipschitz: f64,
    pub restart: usize,
    pub inner_iters: usize,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub records: Vec<IterRecord>,
    pub status: Status,
    /// Best point found (lowest `F` among the recorded iterates).
    pub solution: Vec<f64>,
    pub best_value: f64,
    pub final_gap: f64,
    /// Iterations performed (restart segments summed).
    pub iterations: usize,
    pub grad_calls: usize,
    pub fval_calls: usize,
    pub sample_calls: usize,
    /// `Σ A_k δ / A_N`, the error accumulated from an inexact oracle.
    pub delta_accumulation: f64,
    /// Restart centers: the start point followed by the output of every segment.
    pub restart_points: Vec<Vec<f64>>,
    /// Largest Lipschitz estimate used.
    pub max_lipschitz: f64,
    pub message: Option<String>,
}

impl RunReport {
    pub fn empty(status: Status) -> Self {
        Self {
            records: Vec::new(),
            status,
            solution: Vec::new(),
            best_value: f64::INFINITY,
            final_gap: f64::INFINITY,
            iterations: 0,
            grad_calls: 0,
            fval_calls: 0,
            sample_calls: 0,
            delta_accumulation: 0.0,
            restart_points: Vec::new(),
            max_lipschitz: 0.0,
            message: None,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// Function-value calls per iteration (zero before the first iteration).
    pub fn fval_calls_per_iteration(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.fval_calls as f64 / self.iterations as f64
        }
    }

    /// Running minimum of the recorded `F` values.
    pub fn best_values(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.min(r.f_value);
                best
            })
            .collect()
    }
}
