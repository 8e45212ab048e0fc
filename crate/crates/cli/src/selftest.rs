//! Fast randomized invariant checks behind `fomkit selftest`.

use std::io::Write;
use std::sync::Arc;

use fomkit::entropy_lsq::{random_instance, solve_inner, EntropyLsqProblem, InnerSubproblem, LsqCase};
use fomkit::fgm::{fgm_solve, FgmOptions, StopRule};
use fomkit::io;
use fomkit::linalg::{dot, norm1, Norm};
use fomkit::oracle::{verify_dl_oracle, wrap_holder_as_inexact, FirstOrderOracle, HolderClass};
use fomkit::prox::{mirror_step, PowerNormParams};
use fomkit::restart::{restart_solve, RestartLipschitz, RestartOptions};
use fomkit::stochastic::{batched_gradient, StochasticOracle, VarianceBound};
use fomkit::{suites, Composite, FeasibleSet, ProxSetup};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{CliError, CmdResult};

type Check = fn(&mut ChaCha8Rng) -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn prox_bounds(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst: f64 = f64::NEG_INFINITY;
    for n in [3usize, 10, 50] {
        let simplex = FeasibleSet::simplex(n);
        for setup in [ProxSetup::entropy(n).unwrap(), ProxSetup::power_norm(n).unwrap()] {
            for _ in 0..1000 {
                let x = simplex.sample(rng);
                let z = simplex.sample(rng);
                let r = Norm::L1.dist(&x, &z);
                let v = setup.bregman(&x, &z).map_err(|e| e.to_string())?;
                worst = worst.max(0.5 * r * r - v);
                let rc = Norm::L1.dist(&x, setup.center());
                worst = worst.max(2.0 * setup.d(&x) - setup.omega_n() * rc * rc);
            }
        }
    }
    ensure(worst <= 1e-12, || format!("strong convexity or omega bound violated by {worst:e}"))?;
    Ok(format!("max violation {worst:.1e}"))
}

fn mirror_steps_stay_feasible(rng: &mut ChaCha8Rng) -> Result<String, String> {
    for _ in 0..200 {
        let n = rng.random_range(2..20);
        let setup = ProxSetup::entropy(n).unwrap();
        let z = FeasibleSet::simplex(n).sample(rng);
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let x = mirror_step(&setup, &Composite::zero(), &z, &g, rng.random_range(0.01..10.0))
            .map_err(|e| e.to_string())?
            .x;
        ensure(x.iter().all(|v| *v >= 0.0) && (x.iter().sum::<f64>() - 1.0).abs() <= 1e-10, || {
            format!("mirror step left the simplex: {x:?}")
        })?;
    }
    Ok("200 steps".into())
}

fn fgm_rate_bound(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let n = 20;
    let target: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
    let weights: Vec<f64> = (0..n).map(|i| if i == 0 { 1.0 } else { rng.random_range(0.001..1.0) }).collect();
    let domain = FeasibleSet::new_box(vec![-1.0; n], vec![1.0; n]).unwrap();
    let p = suites::weighted_quadratic(&weights, &target, domain).map_err(|e| e.to_string())?;
    let xopt: Vec<f64> = target.iter().map(|t| t.clamp(-1.0, 1.0)).collect();
    let fstar: f64 = 0.5 * (0..n).map(|i| weights[i] * (xopt[i] - target[i]).powi(2)).sum::<f64>();
    let r2 = 0.5 * dot(&xopt, &xopt);
    let r = fgm_solve(&p, &FgmOptions::new(1e-12).with_stop(StopRule::Iterations(100))).map_err(|e| e.to_string())?;
    for rec in r.records.iter().skip(1) {
        let bound = 4.0 * r2 / ((rec.iter + 1) as f64).powi(2);
        ensure(rec.f_value - fstar <= bound + 1e-9, || format!("rate bound fails at N = {}", rec.iter))?;
    }
    Ok("100 iterations".into())
}

fn universal_economy(_: &mut ChaCha8Rng) -> Result<String, String> {
    let s = suites::universal_smooth_sweep(&[1e-3]).map_err(|e| e.to_string())?;
    let row = s.rows[0];
    let ratio = row.fval_calls as f64 / row.iterations.max(1) as f64;
    ensure(row.converged && ratio <= 4.5, || format!("converged = {}, fval/iter = {ratio}", row.converged))?;
    Ok(format!("fval calls per iteration {ratio:.2}"))
}

fn restart_halving(_: &mut ChaCha8Rng) -> Result<String, String> {
    let (p, target) = suites::conditioned_quadratic().map_err(|e| e.to_string())?;
    let r = restart_solve(&p, &RestartOptions::new(1e-8, RestartLipschitz::Known(100.0))).map_err(|e| e.to_string())?;
    let d: Vec<f64> = r
        .restart_points
        .iter()
        .map(|c| c.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum())
        .collect();
    for w in d.windows(2) {
        ensure(w[1] <= 0.5 * w[0] + 1e-9, || format!("distance went from {} to {}", w[0], w[1]))?;
    }
    Ok(format!("{} restarts", d.len() - 1))
}

fn oracle_contract(_: &mut ChaCha8Rng) -> Result<String, String> {
    let n = 4;
    let mut worst: f64 = f64::NEG_INFINITY;
    for (k, &nu) in [0.0, 0.5, 1.0].iter().enumerate() {
        let f = move |x: &[f64]| dot(x, x).sqrt().powf(1.0 + nu) / (1.0 + nu);
        let fo = Arc::new(FirstOrderOracle::new(n, move |x| {
            let r = dot(x, x).sqrt();
            let g = if r == 0.0 { vec![0.0; x.len()] } else { x.iter().map(|v| v * r.powf(nu - 1.0)).collect() };
            (f(x), g)
        }));
        let o = wrap_holder_as_inexact(fo, HolderClass::new(nu, 2f64.powf(1.0 - nu)).unwrap(), 1e-2)
            .map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let rep = verify_dl_oracle(&o, f, || (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(), 500, Norm::L2);
        worst = worst.max(rep.max_lower_violation.max(rep.max_upper_violation));
    }
    ensure(worst <= 1e-9, || format!("oracle inequality violated by {worst:e}"))?;
    Ok(format!("max violation {worst:.1e}"))
}

fn inner_weak_duality(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let n = 6;
    let a = PowerNormParams::for_dimension(n).unwrap().a();
    for _ in 0..20 {
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let sub = InnerSubproblem::new(c, rng.random_range(0.05..1.0), a).map_err(|e| e.to_string())?;
        let sol = solve_inner(&sub, 1e-8).map_err(|e| e.to_string())?;
        let primal = sub.value(&sol.x);
        ensure(sol.dual_value <= primal + 1e-6, || format!("dual {} above primal {primal}", sol.dual_value))?;
        ensure((norm1(&sol.x) - 1.0).abs() <= 1e-12, || "recovered point is off the simplex".into())?;
    }
    Ok("20 subproblems".into())
}

fn entropy_lsq_iterates(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let (a, b) = random_instance(4, 8, 0.7, rng.random()).map_err(|e| e.to_string())?;
    for case in [LsqCase::A, LsqCase::B] {
        let p = EntropyLsqProblem::new(a.clone(), b.clone(), 0.05, 1e-4)
            .map_err(|e| e.to_string())?
            .with_case(case);
        let r = p.solve().map_err(|e| e.to_string())?;
        let x = &r.solution;
        ensure(x.iter().all(|v| *v >= 0.0) && (x.iter().sum::<f64>() - 1.0).abs() <= 1e-10, || {
            format!("case {case:?} solution off the simplex")
        })?;
        let best = r.best_values();
        ensure(best.windows(2).all(|w| w[1] <= w[0]), || "best value increased".into())?;
    }
    Ok("both regimes".into())
}

fn file_round_trips(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let (a, b) = random_instance(6, 9, 0.4, rng.random()).map_err(|e| e.to_string())?;
    let back = io::parse_matrix(&io::format_matrix(&a)).map_err(|e| e.to_string())?;
    ensure(back == a, || "matrix round trip changed the matrix".into())?;
    let vb = io::parse_vector(&io::format_vector(&b)).map_err(|e| e.to_string())?;
    ensure(vb == b, || "vector round trip changed the vector".into())?;
    Ok("matrix and vector".into())
}

fn batch_variance(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let n = 3;
    let oracle = StochasticOracle::new(n, VarianceBound::Constant(n as f64), |x: &[f64], r: &mut dyn rand::RngCore| {
        x.iter().map(|v| v + if r.random::<bool>() { 1.0 } else { -1.0 }).collect()
    })
    .map_err(|e| e.to_string())?;
    let x = vec![0.1, 0.2, 0.3];
    let m = 8;
    let trials = 4000;
    let mut acc = 0.0;
    for _ in 0..trials {
        let b = batched_gradient(&oracle, &x, m, rng).map_err(|e| e.to_string())?;
        acc += b.mean.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    let ratio = acc / trials as f64 / (n as f64 / m as f64);
    ensure(ratio <= 1.2, || format!("batch variance ratio {ratio}"))?;
    Ok(format!("variance ratio {ratio:.3}"))
}

const CHECKS: [(&str, Check); 10] = [
    ("prox-bounds", prox_bounds),
    ("mirror-step-feasible", mirror_steps_stay_feasible),
    ("fgm-rate-bound", fgm_rate_bound),
    ("universal-economy", universal_economy),
    ("restart-halving", restart_halving),
    ("oracle-contract", oracle_contract),
    ("inner-weak-duality", inner_weak_duality),
    ("entropy-lsq-iterates", entropy_lsq_iterates),
    ("file-round-trips", file_round_trips),
    ("batch-variance", batch_variance),
];

/// Runs every check and fails if any of them does.
pub(crate) fn run(seed: u64, out: &mut dyn Write) -> CmdResult {
    let mut failures = 0;
    for (i, (name, check)) in CHECKS.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        match check(&mut rng) {
            Ok(detail) => {
                let _ = writeln!(out, "ok    {name:<22} {detail}");
            }
            Err(msg) => {
                failures += 1;
                let _ = writeln!(out, "FAIL  {name:<22} {msg}");
            }
        }
    }
    if failures == 0 {
        Ok(())
    } else {
        Err(CliError::Solver(format!("{failures} self-test check(s) failed")))
    }
}
