//! First-order methods for composite convex optimization.
//!
//! The crate is organized around [`CompositeProblem`] (a smooth part behind a
//! counted oracle, a simple composite term, and a prox setup) and the methods
//! that solve it: the fast gradient method ([`fgm_solve`]), its universal
//! backtracking variant ([`universal_solve`]), restarts and regularization for
//! strong convexity, and a mini-batched stochastic variant. The
//! [`entropy_lsq`] module applies all of this to entropy-regularized least
//! squares on the simplex.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod entropy_lsq;
pub mod error;
pub mod fgm;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod prox;
pub mod report;
pub mod restart;
pub mod sparse;
pub mod stats;
pub mod stochastic;
pub mod suites;
pub mod universal;

pub use entropy_lsq::{EntropyLsqProblem, InnerSubproblem, LsqCase};
pub use error::{Error, Result};
pub use fgm::{fgm_solve, FgmOptions, FgmState, LipschitzMode, StopRule};
pub use io::Config;
pub use linalg::Norm;
pub use oracle::{FirstOrderOracle, HolderClass, InexactOracle, InexactOracleOutput};
pub use problem::{Composite, CompositeProblem, FeasibleSet};
pub use prox::{PowerNormParams, ProxKernel, ProxSetup};
pub use report::{IterRecord, RunReport, Status};
pub use restart::{restart_solve, RestartLipschitz, RestartOptions};
pub use sparse::CscMatrix;
pub use stochastic::{stochastic_fgm_solve, StochasticOptions, StochasticOracle, VarianceBound};
pub use universal::{universal_solve, BacktrackConfig, DeltaRule};
