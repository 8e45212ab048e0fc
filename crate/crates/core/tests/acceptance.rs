//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Reference values come from oracles written here (clipping, long-run
//! projected and mirror-descent solvers, grid searches) rather than from the
//! library. Run with `cargo test -p fomkit --test acceptance`.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use fomkit::entropy_lsq::{
    ellipsoid_2d, random_instance, slater_c, solve_inner, EntropyLsqProblem, InnerSubproblem, LsqCase,
};
use fomkit::fgm::{fgm_solve, FgmOptions, StopRule};
use fomkit::linalg::{dot, Norm};
use fomkit::oracle::{verify_dl_oracle, wrap_holder_as_inexact, FirstOrderOracle, HolderClass, InexactOracle};
use fomkit::problem::{Composite, FeasibleSet};
use fomkit::prox::{mirror_step, PowerNormParams, ProxSetup, POWER_NORM_SCALE};
use fomkit::restart::{regularize, restart_prediction, restart_solve, RestartLipschitz, RestartOptions};
use fomkit::stochastic::{
    batched_gradient, predicted_sample_budget, stochastic_fgm_solve, StochasticOptions, StochasticOracle,
    VarianceBound,
};
use fomkit::{suites, CompositeProblem, CscMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

type Outcome = (bool, String);

// ---------------------------------------------------------------- helpers

fn dense(a: &CscMatrix) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; a.cols()]; a.rows()];
    for (i, j, v) in a.triplets() {
        d[i][j] += v;
    }
    d
}

fn lsq_value_grad(a: &[Vec<f64>], b: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
    let r: Vec<f64> = a.iter().zip(b).map(|(row, bi)| dot(row, x) - bi).collect();
    let mut g = vec![0.0; x.len()];
    for (row, ri) in a.iter().zip(&r) {
        for (gj, aij) in g.iter_mut().zip(row) {
            *gj += aij * ri;
        }
    }
    (0.5 * dot(&r, &r), g)
}

fn neg_entropy(x: &[f64]) -> f64 {
    x.iter().map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 }).sum()
}

/// Euclidean projection onto the simplex by sorting.
fn simplex_projection(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Projected gradient with Armijo backtracking on the simplex; returns the best point and value.
fn projected_gradient<F>(f: F, x0: Vec<f64>, iters: usize) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut step: f64 = 1.0;
    let mut best = (x.clone(), fx);
    for _ in 0..iters {
        step = (step * 2.0).min(1e8);
        loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let xn = simplex_projection(&trial);
            let d: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let (fn_, gn) = f(&xn);
            if fn_ <= fx + dot(&g, &d) + dot(&d, &d) / (2.0 * step) + 1e-15 * fx.abs() || step < 1e-20 {
                x = xn;
                fx = fn_;
                g = gn;
                break;
            }
            step *= 0.5;
        }
        if fx < best.1 {
            best = (x.clone(), fx);
        }
    }
    best
}

// ---------------------------------------------------------------- 1

/// `F(y^N) - F_* <= 4 L R² / (N+1)²` for every `N <= 200`.
fn fgm_rate() -> Outcome {
    let start = Instant::now();
    let n = 50;
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut cases = 0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        // The isotropic instance from the statement plus an ill-conditioned one with the same L.
        let weights_sets = [vec![1.0; n], (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..0.0))).collect::<Vec<_>>()];
        for mut w in weights_sets {
            w[0] = 1.0;
            let domain = FeasibleSet::new_box(vec![-1.0; n], vec![1.0; n]).unwrap();
            let p = suites::weighted_quadratic(&w, &target, domain).unwrap();
            // Separable box problem: the minimizer is the clipped target.
            let xopt: Vec<f64> = target.iter().map(|t| t.clamp(-1.0, 1.0)).collect();
            let fstar: f64 = 0.5 * (0..n).map(|i| w[i] * (xopt[i] - target[i]).powi(2)).sum::<f64>();
            let r2 = 0.5 * dot(&xopt, &xopt);
            let r = fgm_solve(&p, &FgmOptions::new(1e-12).with_stop(StopRule::Iterations(200))).unwrap();
            for rec in r.records.iter().filter(|rec| rec.iter >= 1) {
                let bound = 4.0 * 1.0 * r2 / ((rec.iter + 1) as f64).powi(2);
                worst = worst.max(rec.f_value - fstar - bound);
            }
            cases += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst <= 1e-9 && secs < 1.0,
        format!("{cases} runs, max excess over bound {worst:.2e} (tol 1e-9), {secs:.2}s (limit 1s)"),
    )
}

// ---------------------------------------------------------------- 2, 3

fn universal_criteria() -> (Outcome, Outcome) {
    let eps = [1e-1, 1e-2, 1e-3, 1e-4];
    let start = Instant::now();
    let nonsmooth = suites::universal_nonsmooth_sweep(&eps).unwrap();
    let smooth = suites::universal_smooth_sweep(&eps).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (f0, f1) = (nonsmooth.fit.unwrap(), smooth.fit.unwrap());
    let all_converged = nonsmooth.rows.iter().chain(&smooth.rows).all(|r| r.converged);
    let slopes_ok = (f0.slope - 2.0).abs() <= 0.4 && (f1.slope - 0.5).abs() <= 0.1 && f0.r2 >= 0.95 && f1.r2 >= 0.95;
    let iters = |s: &suites::Sweep| s.rows.iter().map(|r| r.iterations.to_string()).collect::<Vec<_>>().join("/");
    let c2 = (
        slopes_ok && all_converged && secs < 30.0,
        format!(
            "nu=0 slope {:.3} R2 {:.4} (N {}), nu=1 slope {:.3} R2 {:.4} (N {}), {secs:.1}s (limit 30s)",
            f0.slope,
            f0.r2,
            iters(&nonsmooth),
            f1.slope,
            f1.r2,
            iters(&smooth)
        ),
    );
    let runs: Vec<f64> = nonsmooth
        .rows
        .iter()
        .chain(&smooth.rows)
        .filter(|r| r.iterations >= 50)
        .map(|r| r.fval_calls as f64 / r.iterations as f64)
        .collect();
    let max_ratio = runs.iter().cloned().fold(0.0, f64::max);
    let c3 = (
        !runs.is_empty() && max_ratio <= 4.5,
        format!("{} runs with >= 50 iterations, max fval calls per iteration {max_ratio:.3} (limit 4.5)", runs.len()),
    );
    (c2, c3)
}

// ---------------------------------------------------------------- 4

fn restart_halving() -> Outcome {
    let start = Instant::now();
    let (p, target) = suites::conditioned_quadratic().unwrap();
    let eps = 1e-9;
    let r = restart_solve(&p, &RestartOptions::new(eps, RestartLipschitz::Known(100.0))).unwrap();
    let dist: Vec<f64> = r
        .restart_points
        .iter()
        .map(|c| c.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum())
        .collect();
    let worst = dist.windows(2).map(|w| w[1] - 0.5 * w[0]).fold(f64::NEG_INFINITY, f64::max);
    // Same a-priori R² the run uses: ||x0 - x_*||² <= 2 max V over the box.
    let r2 = 2.0 * p.setup().r2_bound();
    let formula = restart_prediction(100.0, 1.0, p.setup().omega_n(), r2, eps);
    let secs = start.elapsed().as_secs_f64();
    (
        worst <= 1e-9 && (r.grad_calls as f64) <= 2.0 * formula && secs < 5.0,
        format!(
            "{} restarts, max d_(k+1) - d_k/2 = {worst:.2e} (tol 1e-9), grad calls {} vs formula {formula:.0} (limit 2x), {secs:.2}s",
            dist.len() - 1,
            r.grad_calls
        ),
    )
}

// ---------------------------------------------------------------- 5

/// `½||Bx - c||²` on `[-1,1]^6` with a rank-3 `B`; `c` has a known component
/// outside the range of `B`, so `F_* = ½||c_perp||²` and the minimizers form a face.
fn regularization_sandwich() -> Outcome {
    let n = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // Orthonormal rows give an exact range decomposition.
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < 4 {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        for u in &q {
            let s = dot(u, &v);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= s * ui;
            }
        }
        let nv = dot(&v, &v).sqrt();
        q.push(v.into_iter().map(|x| x / nv).collect());
    }
    // B = diag(s) Q[0..3] as a 4 x 6 matrix with a zero fourth row, plus e4 in the residual.
    let s = [3.0, 1.5, 0.5];
    let mut b_rows: Vec<Vec<f64>> = (0..3).map(|i| q[i].iter().map(|v| s[i] * v).collect()).collect();
    b_rows.push(vec![0.0; n]);
    let xhat: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut c: Vec<f64> = b_rows.iter().map(|row| dot(row, &xhat)).collect();
    c[3] = 0.7;
    let fstar = 0.5 * 0.7 * 0.7;
    let lip = s[0] * s[0];
    let (bb, cc) = (b_rows.clone(), c.clone());
    let oracle = FirstOrderOracle::new(n, move |x| {
        let r: Vec<f64> = bb.iter().zip(&cc).map(|(row, ci)| dot(row, x) - ci).collect();
        let mut g = vec![0.0; x.len()];
        for (row, ri) in bb.iter().zip(&r) {
            for (gj, v) in g.iter_mut().zip(row) {
                *gj += v * ri;
            }
        }
        (0.5 * dot(&r, &r), g)
    });
    let setup = ProxSetup::euclidean(FeasibleSet::unit_box(n), None).unwrap();
    let p = CompositeProblem::new(Arc::new(oracle), Composite::zero(), setup)
        .unwrap()
        .with_lipschitz(lip)
        .unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for eps in [1e-2, 1e-3] {
        let r2 = p.setup().r2_bound();
        let reg = regularize(&p, eps, r2).unwrap();
        let mut opts = RestartOptions::new(eps / 2.0, RestartLipschitz::Known(lip));
        opts.early_exit = true;
        let rep = restart_solve(&reg, &opts).unwrap();
        let excess = p.objective(&rep.solution) - fstar;
        ok &= excess <= eps && excess >= -1e-12;
        parts.push(format!("eps {eps:.0e}: F(y) - F_* = {excess:.2e} ({} iters)", rep.iterations));
    }
    (ok, parts.join(", "))
}

// ---------------------------------------------------------------- 6

/// Composite mirror descent on `s(x) + μ Σ x ln x` over the simplex,
/// `x+ ∝ exp((L_k ln x - ∇s(x)) / (L_k + μ))`, where `L_k <= l_max` is found
/// by halving and doubling against the KL descent test. Returns the best point.
fn entropic_mirror_descent<S>(smooth: S, mu: f64, l_max: f64, x0: Vec<f64>, iters: usize) -> (Vec<f64>, f64)
where
    S: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let step = |x: &[f64], g: &[f64], lk: f64| -> Vec<f64> {
        let e: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| (lk * xi.ln() - gi) / (lk + mu)).collect();
        let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = e.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| (v / s).max(1e-300)).collect::<Vec<f64>>()
    };
    let mut x = x0;
    let mut best = (x.clone(), f64::INFINITY);
    let mut lk = l_max;
    for _ in 0..=iters {
        let (f, g) = smooth(&x);
        let total = f + mu * neg_entropy(&x);
        if total < best.1 {
            best = (x.clone(), total);
        }
        lk /= 2.0;
        loop {
            let xn = step(&x, &g, lk);
            let d: Vec<f64> = xn.iter().zip(&x).map(|(p, q)| p - q).collect();
            let kl: f64 = xn.iter().zip(&x).map(|(p, q)| p * (p / q).ln()).sum();
            if smooth(&xn).0 <= f + dot(&g, &d) + lk * kl + 1e-15 * (1.0 + f.abs()) || lk >= l_max {
                x = xn;
                break;
            }
            lk = (2.0 * lk).min(l_max);
        }
    }
    best
}

fn entropy_case_a() -> Outcome {
    let start = Instant::now();
    let (mu, eps) = (1e-6, 1e-6);
    let (a, b) = random_instance(5, 10, 0.6, 3).unwrap();
    let ad = dense(&a);
    let l = (0..10).map(|j| ad.iter().map(|r| r[j] * r[j]).sum::<f64>()).fold(0.0, f64::max);
    let (_, reference) = entropic_mirror_descent(|x| lsq_value_grad(&ad, &b, x), mu, l, vec![0.1; 10], 100_000);
    let prob = EntropyLsqProblem::new(a, b.clone(), mu, eps).unwrap().with_case(LsqCase::A);
    let r = prob.solve().unwrap();
    let (f, _) = lsq_value_grad(&ad, &b, &r.solution);
    let value = f + mu * neg_entropy(&r.solution);
    let diff = (value - reference).abs();
    if std::env::var("ACCEPTANCE_DEBUG").is_ok() {
        eprintln!("case a: F = {value:.12e}, reference = {reference:.12e}");
    }
    let secs = start.elapsed().as_secs_f64();
    (
        diff <= 1e-6 && r.converged() && secs < 10.0,
        format!(
            "|F - F_ref| = {diff:.2e} (tol 1e-6), {} iterations (bound {:.0}), {secs:.2}s (limit 10s)",
            r.iterations,
            prob.case_a_iteration_bound()
        ),
    )
}

// ---------------------------------------------------------------- 7

fn entropy_case_b() -> Outcome {
    let start = Instant::now();
    let (mu, eps) = (0.1, 1e-5);
    let mut ok = true;
    let mut worst_diff: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for seed in 0..3u64 {
        let (a, b) = random_instance(5, 10, 0.6, seed).unwrap();
        let ad = dense(&a);
        let (_, reference) = projected_gradient(
            |x| {
                let (f, mut g) = lsq_value_grad(&ad, &b, x);
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi += mu * (xi.max(1e-300).ln() + 1.0);
                }
                (f + mu * neg_entropy(x), g)
            },
            vec![0.1; 10],
            1_000_000,
        );
        let prob = EntropyLsqProblem::new(a, b.clone(), mu, eps).unwrap();
        ok &= prob.case() == LsqCase::B;
        let r = prob.solve().unwrap();
        let (f, _) = lsq_value_grad(&ad, &b, &r.solution);
        let diff = (f + mu * neg_entropy(&r.solution) - reference).abs();
        let ratio = r.iterations as f64 / prob.case_b_iteration_estimate();
        worst_diff = worst_diff.max(diff);
        worst_ratio = worst_ratio.max(ratio);
        ok &= diff <= 1e-4 && ratio <= 4.0;
    }
    let secs = start.elapsed().as_secs_f64();
    (
        ok && secs < 60.0,
        format!(
            "3 seeds, max |F - F_ref| = {worst_diff:.2e} (tol 1e-4), max iterations / estimate = {worst_ratio:.2} (limit 4), {secs:.1}s (limit 60s)"
        ),
    )
}

// ---------------------------------------------------------------- 8

fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    f1.min(f2).min(f(lo)).min(f(hi))
}

/// Dual function `G(λ) = min_{x in [0,1]^n, t in [0, n^{2/a}]} L(x, t, λ)` by golden-section search.
fn dual_oracle(c: &[f64], mu: f64, a: f64, l1: f64, l2: f64) -> f64 {
    let n = c.len() as f64;
    let tmax = n.powf(2.0 / a);
    let mut g = -l1 + golden_min(|t| t - l2 * t.powf(a / 2.0), 0.0, tmax);
    for &ck in c {
        g += golden_min(
            |x| (ck + l1) * x + l2 * x.powf(a) + if x > 0.0 { mu * x * x.ln() } else { 0.0 },
            0.0,
            1.0,
        );
    }
    g
}

/// Zooming grid maximization of the dual over `{λ₂ >= 0, |λ₁| + λ₂ <= C}`.
fn dual_grid_max(c: &[f64], mu: f64, a: f64, cap: f64) -> f64 {
    let (mut c1, mut c2, mut w) = (0.0, cap / 2.0, cap);
    let k = 40;
    let mut best = f64::NEG_INFINITY;
    loop {
        let h = 2.0 * w / k as f64;
        let (mut b1, mut b2) = (c1, c2);
        for i in 0..=k {
            for j in 0..=k {
                let l1 = c1 - w + i as f64 * h;
                let l2 = c2 - w + j as f64 * h;
                if l2 < 0.0 || l1.abs() + l2 > cap {
                    continue;
                }
                let v = dual_oracle(c, mu, a, l1, l2);
                if v > best {
                    best = v;
                    b1 = l1;
                    b2 = l2;
                }
            }
        }
        // Finer than the nominal C·1e-3 so the grid error stays well below the tolerance.
        if h <= cap * 1e-6 {
            return best;
        }
        c1 = b1;
        c2 = b2;
        w /= 4.0;
    }
}

fn subproblem_value(c: &[f64], mu: f64, a: f64, x: &[f64]) -> f64 {
    let s: f64 = x.iter().map(|v| v.max(0.0).powf(a)).sum();
    dot(c, x) + s.powf(2.0 / a) + mu * neg_entropy(x)
}

/// Dense simplex grid for a start, then a long entropic mirror-descent run.
fn subproblem_primal_reference(c: &[f64], mu: f64, a: f64) -> (Vec<f64>, f64) {
    let n = c.len();
    let h = 12usize;
    let mut best = (vec![1.0 / n as f64; n], f64::INFINITY);
    let mut idx = vec![0usize; n];
    fn rec(pos: usize, left: usize, idx: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if pos == idx.len() - 1 {
            idx[pos] = left;
            visit(idx);
            return;
        }
        for v in 0..=left {
            idx[pos] = v;
            rec(pos + 1, left - v, idx, visit);
        }
    }
    rec(0, h, &mut idx, &mut |ix| {
        let x: Vec<f64> = ix.iter().map(|&v| v as f64 / h as f64).collect();
        let v = subproblem_value(c, mu, a, &x);
        if v < best.1 {
            best = (x, v);
        }
    });
    let start: Vec<f64> = best.0.iter().map(|v| 0.9 * v + 0.1 / n as f64).collect();
    let smooth = |x: &[f64]| {
        let s: f64 = x.iter().map(|v| v.powf(a)).sum();
        let scale = 2.0 * s.powf(2.0 / a - 1.0);
        let g = (0..n).map(|k| c[k] + scale * x[k].powf(a - 1.0)).collect();
        (dot(c, x) + s.powf(2.0 / a), g)
    };
    entropic_mirror_descent(smooth, mu, 1e6, start, 20_000)
}

fn random_subproblem(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, f64) {
    let c: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            2.0 * z
        })
        .collect();
    (c, rng.random_range(0.05..1.0))
}

fn inner_dual_solver() -> Outcome {
    let start = Instant::now();
    let n = 5;
    let a = PowerNormParams::for_dimension(n).unwrap().a();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_dual, mut worst_primal): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let (c, mu) = random_subproblem(&mut rng, n);
        let sub = InnerSubproblem::new(c.clone(), mu, a).unwrap();
        let cap = 4.0 * c.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 4.0 * mu * (2.0 * n as f64).ln() + 8.0;
        let res = ellipsoid_2d(&sub, 1e-8).unwrap();
        let grid = dual_grid_max(&c, mu, a, cap);
        worst_dual = worst_dual.max((-res.value - grid).abs());
        let sol = solve_inner(&sub, 1e-8).unwrap();
        let (_, pref) = subproblem_primal_reference(&c, mu, a);
        worst_primal = worst_primal.max((subproblem_value(&c, mu, a, &sol.x) - pref).abs());
    }
    // Slater bound: multipliers recovered from the KKT conditions at the reference primal solution.
    let mut worst_slater: f64 = f64::NEG_INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let (c, mu) = random_subproblem(&mut rng, n);
        let sub = InnerSubproblem::new(c.clone(), mu, a).unwrap();
        let (x, _) = subproblem_primal_reference(&c, mu, a);
        let t = x.iter().map(|v| v.powf(a)).sum::<f64>().powf(2.0 / a);
        let l2 = (2.0 / a) * t.powf(1.0 - a / 2.0);
        let l1 = -(0..n)
            .map(|k| c[k] + l2 * a * x[k].powf(a - 1.0) + mu * (x[k].ln() + 1.0))
            .sum::<f64>()
            / n as f64;
        worst_slater = worst_slater.max((l1.abs() + l2) - slater_c(&sub));
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst_dual <= 1e-4 && worst_primal <= 1e-4 && worst_slater <= 0.0,
        format!(
            "20 subproblems: max dual gap to grid {worst_dual:.2e}, max primal gap to reference {worst_primal:.2e} (tol 1e-4); 100 seeds: max ||λ*||_1 - C = {worst_slater:.2} (<= 0); {secs:.1}s"
        ),
    )
}

// ---------------------------------------------------------------- 9

fn entropy_v(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(&a, &b)| if a > 0.0 { a * (a / b).ln() } else { 0.0 } - a + b).sum()
}

fn power_v(a: f64, x: &[f64], z: &[f64]) -> f64 {
    let d = |v: &[f64]| v.iter().map(|t| t.powf(a)).sum::<f64>().powf(2.0 / a) / (2.0 * (a - 1.0));
    let nz = z.iter().map(|t| t.powf(a)).sum::<f64>().powf(1.0 / a);
    let lin: f64 = x
        .iter()
        .zip(z)
        .map(|(xi, zi)| nz.powf(2.0 - a) * zi.powf(a - 1.0) / (a - 1.0) * (xi - zi))
        .sum();
    POWER_NORM_SCALE * (d(x) - d(z) - lin)
}

fn l1_dist(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| (a - b).abs()).sum()
}

/// Projected gradient on `<g, x> + KL(x, z)/α`, then Newton steps on the
/// equality-constrained optimality system.
fn mirror_numeric(z: &[f64], g: &[f64], alpha: f64) -> Vec<f64> {
    let n = z.len();
    let grad = |x: &[f64]| -> Vec<f64> { (0..n).map(|i| g[i] + (x[i].max(1e-300) / z[i]).ln() / alpha).collect() };
    let obj = |x: &[f64]| dot(g, x) + entropy_v(x, z) / alpha;
    let mut x = vec![1.0 / n as f64; n];
    let mut step: f64 = alpha * 0.01;
    for _ in 0..5_000 {
        let (fx, gx) = (obj(&x), grad(&x));
        step *= 2.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&gx).map(|(a, b)| a - step * b).collect();
            let xn = simplex_projection(&trial);
            let d: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            if obj(&xn) <= fx + dot(&gx, &d) + dot(&d, &d) / (2.0 * step) + 1e-15 || step < 1e-16 {
                x = xn;
                break;
            }
            step *= 0.5;
        }
    }
    // Hessian diag(1/(α x)); the step keeps Σx fixed.
    for _ in 0..50 {
        let r = grad(&x);
        let w: Vec<f64> = x.iter().map(|xi| alpha * xi).collect();
        let nu = dot(&w, &r) / w.iter().sum::<f64>();
        let dx: Vec<f64> = (0..n).map(|i| -w[i] * (r[i] - nu)).collect();
        let mut t = 1.0;
        while (0..n).any(|i| x[i] + t * dx[i] <= 0.0) {
            t *= 0.5;
        }
        for i in 0..n {
            x[i] += t * dx[i];
        }
    }
    x
}

fn prox_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut pinsker, mut omega, mut mismatch): (f64, f64, f64) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0);
    let mut count = 0;
    for n in [3usize, 10, 100] {
        let simplex = FeasibleSet::simplex(n);
        for setup in [ProxSetup::entropy(n).unwrap(), ProxSetup::power_norm(n).unwrap()] {
            let a = PowerNormParams::for_dimension(n).unwrap().a();
            let is_entropy = matches!(setup.kernel(), fomkit::ProxKernel::Entropy);
            let indep = |x: &[f64], z: &[f64]| if is_entropy { entropy_v(x, z) } else { power_v(a, x, z) };
            let c = setup.center().to_vec();
            for _ in 0..10_000 {
                let x = simplex.sample(&mut rng);
                let z = simplex.sample(&mut rng);
                let v = setup.bregman(&x, &z).unwrap();
                let vi = indep(&x, &z);
                mismatch = mismatch.max((v - vi).abs() / (1.0 + vi.abs()));
                let r = l1_dist(&x, &z);
                pinsker = pinsker.max(0.5 * r * r - v);
                let vc = setup.bregman(&x, &c).unwrap();
                let rc = l1_dist(&x, &c);
                omega = omega.max(2.0 * vc - setup.omega_n() * rc * rc);
                count += 1;
            }
        }
    }
    let mut step_err: f64 = 0.0;
    for k in 0..100 {
        let n = 3 + k % 8;
        let setup = ProxSetup::entropy(n).unwrap();
        let d = FeasibleSet::simplex(n).sample(&mut rng);
        let z: Vec<f64> = d.iter().map(|v| 0.5 * v + 0.5 / n as f64).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let alpha = rng.random_range(0.1..2.0);
        let closed = mirror_step(&setup, &Composite::zero(), &z, &g, alpha).unwrap().x;
        let numeric = mirror_numeric(&z, &g, alpha);
        step_err = step_err.max(closed.iter().zip(&numeric).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    (
        pinsker <= 1e-12 && omega <= 1e-12 && mismatch <= 1e-9 && step_err <= 1e-8,
        format!(
            "{count} pairs: max Pinsker violation {pinsker:.2e}, max omega violation {omega:.2e}, V vs direct formula {mismatch:.1e}; 100 mirror steps: max |closed - numeric| {step_err:.1e} (tol 1e-8)"
        ),
    )
}

// ---------------------------------------------------------------- 10

fn minibatch_statistics() -> Outcome {
    let n = 5;
    let x = vec![0.2, -0.4, 0.1, 0.7, -0.3];
    let mut worst_ratio: f64 = 0.0;
    // Gaussian and centered exponential noise, both with unit variance per coordinate.
    for kind in 0..2 {
        let sd = 0.5;
        let d = sd * sd * n as f64;
        let oracle = StochasticOracle::new(n, VarianceBound::Constant(d), move |x: &[f64], rng: &mut dyn rand::RngCore| {
            x.iter()
                .map(|v| {
                    let z: f64 = if kind == 0 {
                        StandardNormal.sample(rng)
                    } else {
                        let e: f64 = Exp1.sample(rng);
                        e - 1.0
                    };
                    v + sd * z
                })
                .collect()
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10 + kind);
        for m in [1usize, 4, 16] {
            let trials = 10_000;
            let mut acc = 0.0;
            for _ in 0..trials {
                let b = batched_gradient(&oracle, &x, m, &mut rng).unwrap();
                acc += b.mean.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            }
            worst_ratio = worst_ratio.max(acc / trials as f64 / (d / m as f64));
        }
    }

    let target = vec![0.3, -0.2, 1.4, 0.1, -0.6];
    let fstar = 0.5 * 0.4 * 0.4;
    let (sd, eps) = (0.1, 1e-3);
    let p = suites::box_quadratic(&target, -1.0, 1.0).unwrap();
    let t = target.clone();
    let so = StochasticOracle::new(n, VarianceBound::Constant(sd * sd * n as f64), move |x: &[f64], rng: &mut dyn rand::RngCore| {
        x.iter()
            .zip(&t)
            .map(|(a, b)| {
                let z: f64 = StandardNormal.sample(rng);
                a - b + sd * z
            })
            .collect()
    })
    .unwrap();
    let pred = predicted_sample_budget(1.0, p.setup().r2_bound(), sd * sd * n as f64, eps);
    let gaps: Vec<f64> = (0..30u64)
        .map(|seed| {
            let mut o = StochasticOptions::new(eps, seed);
            o.max_samples = Some(4 * pred);
            let r = stochastic_fgm_solve(&p, &so, &o).unwrap();
            let y = &r.solution;
            0.5 * y.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() - fstar
        })
        .collect();
    let med = fomkit::stats::median(&gaps);
    (
        worst_ratio <= 1.2 && med <= eps,
        format!(
            "max E||mean - grad||^2 / (D/m) = {worst_ratio:.3} (limit 1.2); 30 seeds at 4x budget ({} samples): median gap {med:.2e} (eps {eps:.0e})",
            4 * pred
        ),
    )
}

// ---------------------------------------------------------------- 11

fn oracle_contract() -> Outcome {
    let n = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut checks = 0;
    let sampler = |seed: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        move || (0..n).map(|_| r.random_range(-2.0..2.0)).collect::<Vec<f64>>()
    };

    // Exact quadratics ½xᵀQx + bᵀx with L = λ_max(Q) by power iteration.
    for s in 0..5u64 {
        let m: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let q: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| m[k][i] * m[k][j]).sum()).collect())
            .collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut v = vec![1.0; n];
        let mut lam = 0.0;
        for _ in 0..5000 {
            let w: Vec<f64> = q.iter().map(|row| dot(row, &v)).collect();
            lam = dot(&w, &w).sqrt();
            v = w.into_iter().map(|x| x / lam).collect();
        }
        let (q2, b2) = (q.clone(), b.clone());
        let value = move |x: &[f64]| {
            let qx: Vec<f64> = q2.iter().map(|row| dot(row, x)).collect();
            0.5 * dot(x, &qx) + dot(&b2, x)
        };
        let (q3, b3, val2) = (q.clone(), b.clone(), value.clone());
        let fo = FirstOrderOracle::new(n, move |x| {
            let g: Vec<f64> = q3.iter().zip(&b3).map(|(row, bi)| dot(row, x) + bi).collect();
            (val2(x), g)
        });
        let o = InexactOracle::exact(Arc::new(fo), lam * (1.0 + 1e-12)).unwrap();
        let rep = verify_dl_oracle(&o, &value, sampler(100 + s), 1000, Norm::L2);
        worst = worst.max(rep.max_lower_violation.max(rep.max_upper_violation));
        checks += 1;
    }

    // ||x||^{1+ν}/(1+ν), whose gradient is ν-Hölder with constant 2^{1-ν}.
    for &nu in &[0.0, 0.25, 0.5, 0.75, 1.0] {
        let f = move |x: &[f64]| dot(x, x).sqrt().powf(1.0 + nu) / (1.0 + nu);
        let fo = FirstOrderOracle::new(n, move |x| {
            let r = dot(x, x).sqrt();
            let g = if r == 0.0 { vec![0.0; x.len()] } else { x.iter().map(|v| v * r.powf(nu - 1.0)).collect() };
            (f(x), g)
        });
        let fo = Arc::new(fo);
        let hc = HolderClass::new(nu, 2f64.powf(1.0 - nu)).unwrap();
        for &delta in &[1e-3, 1e-2, 1e-1] {
            let o = wrap_holder_as_inexact(fo.clone(), hc, delta).unwrap();
            let rep = verify_dl_oracle(&o, f, sampler(200 + checks as u64), 1000, Norm::L2);
            worst = worst.max(rep.max_lower_violation.max(rep.max_upper_violation));
            checks += 1;
        }
    }

    // max_i (a_i·x + b_i): ν = 0 with L_0 = max ||a_i - a_j||.
    let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    let offs: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut l0: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let d = sub(&rows[i], &rows[j]);
            l0 = l0.max(dot(&d, &d).sqrt());
        }
    }
    let (r2, o2) = (rows.clone(), offs.clone());
    let pl = move |x: &[f64]| -> (f64, usize) {
        (0..4).map(|i| (dot(&r2[i], x) + o2[i], i)).fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a })
    };
    let pl2 = pl.clone();
    let rows2 = rows.clone();
    let fo = Arc::new(FirstOrderOracle::new(n, move |x| {
        let (v, i) = pl2(x);
        (v, rows2[i].clone())
    }));
    for &delta in &[1e-3, 1e-2, 1e-1] {
        let o = wrap_holder_as_inexact(fo.clone(), HolderClass::new(0.0, l0).unwrap(), delta).unwrap();
        let rep = verify_dl_oracle(&o, |x| pl(x).0, sampler(300 + checks as u64), 1000, Norm::L2);
        worst = worst.max(rep.max_lower_violation.max(rep.max_upper_violation));
        checks += 1;
    }
    (
        worst <= 1e-9,
        format!("{checks} oracles x 1000 pairs, max violation {worst:.2e} (tol 1e-9)"),
    )
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `ACCEPTANCE_ONLY=2,7` restricts the run to the listed criteria.
fn selected() -> Option<Vec<usize>> {
    let v = std::env::var("ACCEPTANCE_ONLY").ok()?;
    Some(v.split(',').filter_map(|t| t.trim().parse().ok()).collect())
}

fn main() -> ExitCode {
    let only = selected();
    let wanted = |id: usize| only.as_ref().is_none_or(|v| v.contains(&id));
    let mut all = true;
    let mut emit = |id: usize, name: &str, run: &dyn Fn() -> Outcome| {
        if !wanted(id) {
            return;
        }
        let (ok, detail) = run();
        all &= ok;
        println!("{} {id:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    };
    emit(1, "fgm-exact-rate", &fgm_rate);
    if wanted(2) || wanted(3) {
        let (c2, c3) = universal_criteria();
        emit(2, "universal-exponent", &|| c2.clone());
        emit(3, "backtracking-economy", &|| c3.clone());
    }
    emit(4, "restart-halving-budget", &restart_halving);
    emit(5, "regularization-sandwich", &regularization_sandwich);
    emit(6, "entropy-lsq-case-a", &entropy_case_a);
    emit(7, "entropy-lsq-case-b", &entropy_case_b);
    emit(8, "inner-dual-solver", &inner_dual_solver);
    emit(9, "prox-invariants", &prox_invariants);
    emit(10, "minibatch-statistics", &minibatch_statistics);
    emit(11, "oracle-contract", &oracle_contract);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
