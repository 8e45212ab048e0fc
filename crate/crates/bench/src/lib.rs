//! Benchmark fixtures.

use fomkit::entropy_lsq::{random_instance, EntropyLsqProblem, InnerSubproblem, LsqCase};
use fomkit::prox::PowerNormParams;
use fomkit::{suites, CompositeProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tridiagonal(n: usize) -> CompositeProblem {
    suites::tridiagonal_problem(n).expect("valid dimension")
}

pub fn nonsmooth() -> CompositeProblem {
    suites::abs_problem().expect("fixed problem")
}

/// Entropy-regularized least squares in the requested regime.
pub fn entropy_lsq(m: usize, n: usize, mu: f64, eps: f64, case: LsqCase) -> EntropyLsqProblem {
    let (a, b) = random_instance(m, n, 0.5, 7).expect("valid instance");
    EntropyLsqProblem::new(a, b, mu, eps).expect("valid parameters").with_case(case)
}

pub fn inner_subproblems(n: usize, count: usize) -> Vec<InnerSubproblem> {
    let a = PowerNormParams::for_dimension(n).expect("n >= 1").a();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..count)
        .map(|_| {
            let c = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            InnerSubproblem::new(c, rng.random_range(0.05..1.0), a).expect("valid subproblem")
        })
        .collect()
}
