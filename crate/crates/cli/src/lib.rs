//! Command-line front end: solve simplex-constrained least squares from
//! files, run the entropy-LSQ demo, sweep tolerances, and self-test.
//!
//! Exit codes: 0 on success, 1 when input or configuration is rejected, 2
//! when a solver fails.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fomkit::entropy_lsq::{classify, random_instance, EntropyLsqProblem, LsqCase};
use fomkit::fgm::{fgm_solve, theoretical_iterations, FgmOptions, LipschitzMode, StopRule};
use fomkit::io::{self, Config, Method, ProxKind, StopKind};
use fomkit::restart::{regularize, restart_solve, RestartLipschitz, RestartOptions};
use fomkit::stochastic::{
    predicted_sample_budget, stochastic_fgm_solve, StochasticOptions, StochasticOracle, VarianceBound,
};
use fomkit::universal::{BacktrackConfig, DEFAULT_LIPSCHITZ_CEILING};
use fomkit::{suites, CompositeProblem, CscMatrix, FeasibleSet, ProxSetup, RunReport, Status};
use rand::Rng;

pub mod selftest;

/// Sample cap for the stochastic method when the config sets no `max_oracle_calls`.
pub const DEFAULT_SAMPLE_CAP: usize = 20_000_000;

#[derive(Debug, Parser)]
#[command(name = "fomkit", version, about = "Accelerated first-order methods for composite convex problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimize ½||Ax - b||² + mu Σ x ln x over the probability simplex.
    Solve(SolveArgs),
    /// Random entropy-regularized least-squares instance, solved in both regimes.
    DemoEntropyLsq(DemoArgs),
    /// Tolerance sweeps with fitted log-log slopes.
    Benchmark(BenchArgs),
    /// Randomized invariant checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Sparse matrix file (`m n nnz`, then `i j value` lines, 1-based).
    #[arg(long)]
    matrix: PathBuf,
    /// Right-hand side (`m`, then one value per line).
    #[arg(long)]
    rhs: PathBuf,
    /// `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Convergence history CSV.
    #[arg(long)]
    out: PathBuf,
    /// Also write the final point.
    #[arg(long)]
    solution: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Probability of a nonzero entry in A.
    #[arg(long, default_value_t = 0.6)]
    density: f64,
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// History CSV of the run in the selected regime.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// One of universal, fgm, restart, all.
    #[arg(long, default_value = "universal")]
    suite: String,
    #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3,1e-4")]
    eps: Vec<f64>,
    /// Also write the rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Solver(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Solver(m) => write!(f, "solver failed: {m}"),
        }
    }
}

fn invalid(e: impl fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn failed(e: impl fmt::Display) -> CliError {
    CliError::Solver(e.to_string())
}

type CmdResult = std::result::Result<(), CliError>;

/// Runs the command line `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(&a, out),
        Command::DemoEntropyLsq(a) => demo(&a, out),
        Command::Benchmark(a) => benchmark(&a, out),
        Command::Selftest(a) => selftest::run(a.seed, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "fomkit: {e}");
            e.exit_code()
        }
    }
}

// ---------------------------------------------------------------- solve

fn check_config(cfg: &Config, n: usize) -> CmdResult {
    if n == 0 {
        return Err(invalid("matrix has no columns"));
    }
    match (cfg.prox, cfg.mu > 0.0) {
        (ProxKind::Euclidean, true) => {
            return Err(invalid(
                "the entropy term needs prox = entropy or prox = powernorm (no closed-form Euclidean step)",
            ))
        }
        (ProxKind::PowerNorm, false) => return Err(invalid("prox = powernorm needs mu > 0")),
        _ => {}
    }
    if cfg.method == Method::Restart && cfg.mu <= 0.0 {
        return Err(invalid("method = restart needs mu > 0 (use method = regularize otherwise)"));
    }
    Ok(())
}

fn build_problem(a: &CscMatrix, b: &[f64], cfg: &Config) -> std::result::Result<(EntropyLsqProblem, CompositeProblem), CliError> {
    let lsq = EntropyLsqProblem::new(a.clone(), b.to_vec(), cfg.mu, cfg.eps).map_err(invalid)?;
    let n = a.cols();
    let setup = match cfg.prox {
        ProxKind::Euclidean => ProxSetup::euclidean(FeasibleSet::simplex(n), None),
        ProxKind::Entropy => ProxSetup::entropy(n),
        ProxKind::PowerNorm => ProxSetup::power_norm(n),
    }
    .map_err(invalid)?;
    let mut problem = lsq.composite_problem(setup).map_err(invalid)?;
    let l = match (cfg.lipschitz, cfg.prox) {
        (Some(l), _) => l,
        // ||A||_F² bounds the largest eigenvalue of AᵀA.
        (None, ProxKind::Euclidean) => a.frobenius_sq(),
        (None, _) => lsq.lipschitz(),
    };
    problem = problem.with_lipschitz(l.max(f64::MIN_POSITIVE)).map_err(invalid)?;
    Ok((lsq, problem))
}

fn fgm_options(cfg: &Config, problem: &CompositeProblem, adaptive: bool) -> FgmOptions {
    let l = problem.lipschitz().unwrap_or(cfg.l0);
    let stop = match cfg.stop_rule {
        StopKind::Certificate => StopRule::Certificate,
        StopKind::Iterations => StopRule::Iterations(theoretical_iterations(l, problem.setup().r2_bound(), cfg.eps)),
        StopKind::GradMapping => StopRule::GradMapping,
        StopKind::Budget => StopRule::Budget,
    };
    let mut opts = FgmOptions::new(cfg.eps).with_stop(stop);
    if adaptive {
        opts = opts.with_mode(LipschitzMode::Adaptive(BacktrackConfig {
            l0: cfg.l0,
            delta_rule: cfg.delta_rule,
            ceiling: DEFAULT_LIPSCHITZ_CEILING,
        }));
    }
    opts.max_grad_calls = cfg.max_oracle_calls;
    opts
}

fn restart_options(cfg: &Config, problem: &CompositeProblem, eps: f64) -> RestartOptions {
    let mut opts = RestartOptions::new(eps, RestartLipschitz::Known(problem.lipschitz().unwrap_or(cfg.l0)));
    opts.early_exit = cfg.stop_rule == StopKind::Certificate;
    opts.max_grad_calls = cfg.max_oracle_calls;
    opts
}

/// Unbiased row-sampling gradient `m a_i (a_iᵀx - b_i)` with a variance
/// bound valid on the whole simplex.
fn row_sampling_oracle(a: &CscMatrix, b: &[f64]) -> std::result::Result<StochasticOracle, CliError> {
    let rows = Arc::new(a.row_lists());
    let b = Arc::new(b.to_vec());
    let (m, n) = (a.rows(), a.cols());
    let mut d = 0.0;
    for (i, row) in rows.iter().enumerate() {
        let norm_sq: f64 = row.iter().map(|(_, v)| v * v).sum();
        // a_iᵀx over the simplex ranges over the convex hull of the row entries (zeros included).
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(_, v) in row {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if row.len() < n {
            lo = lo.min(0.0);
            hi = hi.max(0.0);
        }
        let r = (hi - b[i]).abs().max((lo - b[i]).abs());
        d += m as f64 * norm_sq * r * r;
    }
    StochasticOracle::new(n, VarianceBound::Constant(d.max(f64::MIN_POSITIVE)), move |x, rng| {
        let i = rng.random_range(0..m);
        let r: f64 = rows[i].iter().map(|&(j, v)| v * x[j]).sum::<f64>() - b[i];
        let mut g = vec![0.0; x.len()];
        for &(j, v) in &rows[i] {
            g[j] = m as f64 * v * r;
        }
        g
    })
    .map_err(invalid)
}

fn run_method(cfg: &Config, a: &CscMatrix, b: &[f64], problem: &CompositeProblem) -> std::result::Result<RunReport, CliError> {
    match cfg.method {
        Method::Fgm => fgm_solve(problem, &fgm_options(cfg, problem, false)).map_err(failed),
        Method::Universal => fgm_solve(problem, &fgm_options(cfg, problem, true)).map_err(failed),
        Method::Restart => restart_solve(problem, &restart_options(cfg, problem, cfg.eps)).map_err(failed),
        Method::Regularize => {
            let reg = regularize(problem, cfg.eps, problem.setup().r2_bound()).map_err(failed)?;
            let mut report = restart_solve(&reg, &restart_options(cfg, &reg, cfg.eps / 2.0)).map_err(failed)?;
            // Report the original objective at the returned point.
            report.best_value = problem.objective(&report.solution);
            Ok(report)
        }
        Method::Stochastic => {
            let oracle = row_sampling_oracle(a, b)?;
            let mut opts = StochasticOptions::new(cfg.eps, cfg.seed);
            opts.max_samples = Some(cfg.max_oracle_calls.unwrap_or(DEFAULT_SAMPLE_CAP));
            stochastic_fgm_solve(problem, &oracle, &opts).map_err(failed)
        }
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Fgm => "fgm",
        Method::Universal => "universal",
        Method::Restart => "restart",
        Method::Regularize => "regularize",
        Method::Stochastic => "stochastic",
    }
}

fn solve(args: &SolveArgs, out: &mut dyn Write) -> CmdResult {
    let a = io::load_matrix(&args.matrix).map_err(|e| invalid(format!("{}: {e}", args.matrix.display())))?;
    let b = io::load_vector(&args.rhs).map_err(|e| invalid(format!("{}: {e}", args.rhs.display())))?;
    let cfg = Config::load(&args.config).map_err(|e| invalid(format!("{}: {e}", args.config.display())))?;
    if b.len() != a.rows() {
        return Err(invalid(format!("rhs has {} entries but the matrix has {} rows", b.len(), a.rows())));
    }
    check_config(&cfg, a.cols())?;
    let (_, problem) = build_problem(&a, &b, &cfg)?;
    let report = run_method(&cfg, &a, &b, &problem)?;
    io::write_history(&report, &args.out).map_err(|e| invalid(format!("{}: {e}", args.out.display())))?;
    if let Some(p) = &args.solution {
        io::write_vector(&report.solution, p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
    }
    let objective = problem.objective(&report.solution);
    let _ = writeln!(out, "method      {}", method_name(cfg.method));
    let _ = writeln!(out, "status      {}", report.status);
    let _ = writeln!(out, "iterations  {}", report.iterations);
    let _ = writeln!(out, "grad_calls  {}", report.grad_calls);
    let _ = writeln!(out, "fval_calls  {}", report.fval_calls);
    if cfg.method == Method::Stochastic {
        let _ = writeln!(out, "samples     {}", report.sample_calls);
        if let Some(l) = problem.lipschitz() {
            let d = row_sampling_oracle(&a, &b)?.variance_at(&report.solution);
            let predicted = predicted_sample_budget(l, problem.setup().r2_bound(), d, cfg.eps);
            let _ = writeln!(out, "predicted   {predicted}");
        }
    }
    let _ = writeln!(out, "objective   {objective:.10e}");
    let _ = writeln!(out, "gap         {:.3e}", report.final_gap);
    let _ = writeln!(out, "history     {}", args.out.display());
    if report.status == Status::Failed {
        return Err(failed(report.message.unwrap_or_else(|| "run reported failure".into())));
    }
    Ok(())
}

// ---------------------------------------------------------------- demo

fn demo(args: &DemoArgs, out: &mut dyn Write) -> CmdResult {
    if args.m == 0 || args.n < 2 {
        return Err(invalid("need m >= 1 and n >= 2"));
    }
    if !(args.density > 0.0 && args.density <= 1.0) {
        return Err(invalid("density must lie in (0, 1]"));
    }
    if !(args.mu >= 0.0 && args.eps > 0.0) {
        return Err(invalid("need mu >= 0 and eps > 0"));
    }
    let (a, b) = random_instance(args.m, args.n, args.density, args.seed).map_err(invalid)?;
    let base = EntropyLsqProblem::new(a, b, args.mu, args.eps).map_err(invalid)?;
    let selected = classify(args.mu, args.eps, args.n);
    let _ = writeln!(
        out,
        "instance  m={} n={} nnz={} seed={}  L={:.4e}  mu={:e}  eps={:e}",
        args.m,
        args.n,
        base.matrix().nnz(),
        args.seed,
        base.lipschitz(),
        args.mu,
        args.eps
    );
    let _ = writeln!(
        out,
        "regime    {} (threshold mu <= eps/(2 ln n) = {:.3e})",
        if selected == LsqCase::A { "a" } else { "b" },
        args.eps / (2.0 * (args.n as f64).ln())
    );
    let mut cases = vec![selected];
    let other = if selected == LsqCase::A { LsqCase::B } else { LsqCase::A };
    if other == LsqCase::A || args.mu > 0.0 {
        cases.push(other);
    }
    let _ = writeln!(out, "case  iterations  predicted   objective           gap         ms");
    let mut values = Vec::new();
    for case in cases {
        let p = base.clone().with_case(case);
        let start = Instant::now();
        let r = p.solve().map_err(failed)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let f = p.objective(&r.solution).map_err(failed)?;
        let predicted = match case {
            LsqCase::A => p.case_a_iteration_bound(),
            LsqCase::B => p.case_b_iteration_estimate(),
        };
        let _ = writeln!(
            out,
            "{}     {:>10}  {:>9.0}   {:<18.10e}  {:<10.3e}  {:.1}",
            if case == LsqCase::A { "a" } else { "b" },
            r.iterations,
            predicted,
            f,
            r.final_gap,
            ms
        );
        if case == selected {
            if let Some(path) = &args.out {
                io::write_history(&r, path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            }
        }
        values.push(f);
    }
    if values.len() == 2 {
        let _ = writeln!(out, "|F_a - F_b| = {:.3e}", (values[0] - values[1]).abs());
    }
    Ok(())
}

// ---------------------------------------------------------------- benchmark

fn benchmark(args: &BenchArgs, out: &mut dyn Write) -> CmdResult {
    if !suites::SUITE_NAMES.contains(&args.suite.as_str()) {
        return Err(invalid(format!(
            "unknown suite '{}', expected one of {}",
            args.suite,
            suites::SUITE_NAMES.join(", ")
        )));
    }
    if args.eps.is_empty() || args.eps.iter().any(|e| !(*e > 0.0 && *e < 1e3)) {
        return Err(invalid("tolerances must be positive"));
    }
    let sweeps = suites::run_suite(&args.suite, &args.eps).map_err(failed)?;
    let mut csv = String::from("suite,eps,iterations,grad_calls,fval_calls,gap,converged\n");
    for s in &sweeps {
        let _ = writeln!(out, "{}", s.table());
        for r in &s.rows {
            csv.push_str(&format!(
                "{},{:e},{},{},{},{:e},{}\n",
                s.name, r.eps, r.iterations, r.grad_calls, r.fval_calls, r.final_gap, r.converged
            ));
        }
    }
    if let Some(p) = &args.csv {
        std::fs::write(p, csv).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}
