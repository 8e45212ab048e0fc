//! Text formats: sparse matrices, vectors, run configurations and CSV histories.
//!
//! Matrix: line 1 `m n nnz`, then `nnz` lines `i j value` with 1-based
//! indices. Vector: line 1 `n`, then `n` values one per line. Config:
//! `key = value` lines with `#` comments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::report::RunReport;
use crate::sparse::CscMatrix;
use crate::universal::DeltaRule;

/// Non-empty lines with their 1-based line numbers, comments stripped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_field<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} '{tok}'"),
    })
}

fn no_trailing<'a>(mut toks: impl Iterator<Item = &'a str>, line: usize) -> Result<()> {
    match toks.next() {
        Some(t) => Err(Error::Parse {
            line,
            message: format!("unexpected token '{t}'"),
        }),
        None => Ok(()),
    }
}

pub fn parse_matrix(text: &str) -> Result<CscMatrix> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header 'm n nnz'".into(),
    })?;
    let mut t = header.split_whitespace();
    let m: usize = parse_field(t.next(), hl, "row count")?;
    let n: usize = parse_field(t.next(), hl, "column count")?;
    let nnz: usize = parse_field(t.next(), hl, "nnz")?;
    no_trailing(t, hl)?;
    let mut trip = Vec::with_capacity(nnz);
    let mut seen = std::collections::HashSet::with_capacity(nnz);
    let mut last_line = hl;
    for (ln, l) in lines {
        if trip.len() == nnz {
            return Err(Error::Parse {
                line: ln,
                message: format!("more than the declared {nnz} entries"),
            });
        }
        let mut t = l.split_whitespace();
        let i: usize = parse_field(t.next(), ln, "row index")?;
        let j: usize = parse_field(t.next(), ln, "column index")?;
        let v: f64 = parse_field(t.next(), ln, "value")?;
        no_trailing(t, ln)?;
        if i == 0 || i > m || j == 0 || j > n {
            return Err(Error::Parse {
                line: ln,
                message: format!("index ({i}, {j}) outside a {m}x{n} matrix"),
            });
        }
        if !v.is_finite() {
            return Err(Error::Parse {
                line: ln,
                message: "non-finite value".into(),
            });
        }
        if !seen.insert((i, j)) {
            return Err(Error::Parse {
                line: ln,
                message: format!("duplicate entry ({i}, {j})"),
            });
        }
        trip.push((i - 1, j - 1, v));
        last_line = ln;
    }
    if trip.len() != nnz {
        return Err(Error::Parse {
            line: last_line + 1,
            message: format!("expected {nnz} entries, found {}", trip.len()),
        });
    }
    CscMatrix::from_triplets(m, n, &trip)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<CscMatrix> {
    parse_matrix(&fs::read_to_string(path)?)
}

pub fn format_matrix(a: &CscMatrix) -> String {
    let mut s = format!("{} {} {}\n", a.rows(), a.cols(), a.nnz());
    for (i, j, v) in a.triplets() {
        let _ = writeln!(s, "{} {} {}", i + 1, j + 1, v);
    }
    s
}

pub fn write_matrix(a: &CscMatrix, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, format_matrix(a))?)
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing length".into(),
    })?;
    let mut t = header.split_whitespace();
    let n: usize = parse_field(t.next(), hl, "length")?;
    no_trailing(t, hl)?;
    let mut out = Vec::with_capacity(n);
    let mut last_line = hl;
    for (ln, l) in lines {
        if out.len() == n {
            return Err(Error::Parse {
                line: ln,
                message: format!("more than the declared {n} values"),
            });
        }
        let mut t = l.split_whitespace();
        let v: f64 = parse_field(t.next(), ln, "value")?;
        no_trailing(t, ln)?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line: ln,
                message: "non-finite value".into(),
            });
        }
        out.push(v);
        last_line = ln;
    }
    if out.len() != n {
        return Err(Error::Parse {
            line: last_line + 1,
            message: format!("expected {n} values, found {}", out.len()),
        });
    }
    Ok(out)
}

pub fn load_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_vector(&fs::read_to_string(path)?)
}

pub fn format_vector(v: &[f64]) -> String {
    let mut s = format!("{}\n", v.len());
    for x in v {
        let _ = writeln!(s, "{x}");
    }
    s
}

pub fn write_vector(v: &[f64], path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, format_vector(v))?)
}

pub const HISTORY_HEADER: &str = "iter,grad_calls,fval_calls,sample_calls,F,gap,L_k,restart,inner_iters,ms";

pub fn history_csv(report: &RunReport) -> String {
    let mut s = String::from(HISTORY_HEADER);
    s.push('\n');
    for r in &report.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{:.3}",
            r.iter, r.grad_calls, r.fval_calls, r.sample_calls, r.f_value, r.gap, r.lipschitz, r.restart, r.inner_iters, r.ms
        );
    }
    s
}

pub fn write_history(report: &RunReport, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, history_csv(report))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Fgm,
    Universal,
    Restart,
    Regularize,
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxKind {
    Euclidean,
    Entropy,
    PowerNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopKind {
    Certificate,
    Iterations,
    GradMapping,
    Budget,
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub eps: f64,
    pub method: Method,
    pub prox: ProxKind,
    pub l0: f64,
    pub delta_rule: DeltaRule,
    pub seed: u64,
    pub max_oracle_calls: Option<usize>,
    pub stop_rule: StopKind,
    /// Entropy weight of the objective.
    pub mu: f64,
    /// Overrides the computed smoothness constant.
    pub lipschitz: Option<f64>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            method: Method::Fgm,
            prox: ProxKind::Entropy,
            l0: 1.0,
            delta_rule: DeltaRule::Precise,
            seed: 0,
            max_oracle_calls: None,
            stop_rule: StopKind::Certificate,
            mu: 0.0,
            lipschitz: None,
        }
    }
}

fn positive(v: f64, line: usize, key: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Parse {
            line,
            message: format!("{key} must be positive"),
        })
    }
}

fn choice<T: Copy>(value: &str, line: usize, key: &str, options: &[(&str, T)]) -> Result<T> {
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::Parse {
            line,
            message: format!(
                "{key} must be one of {}, got '{value}'",
                options.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
            ),
        })
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Config::default();
        let mut seen = std::collections::HashSet::new();
        for (ln, l) in content_lines(text) {
            let (key, value) = l.split_once('=').ok_or_else(|| Error::Parse {
                line: ln,
                message: "expected 'key = value'".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse {
                    line: ln,
                    message: format!("duplicate key '{key}'"),
                });
            }
            let v = Some(value);
            match key {
                "eps" => c.eps = positive(parse_field(v, ln, key)?, ln, key)?,
                "method" => {
                    c.method = choice(
                        value,
                        ln,
                        key,
                        &[
                            ("fgm", Method::Fgm),
                            ("universal", Method::Universal),
                            ("restart", Method::Restart),
                            ("regularize", Method::Regularize),
                            ("stochastic", Method::Stochastic),
                        ],
                    )?
                }
                "prox" => {
                    c.prox = choice(
                        value,
                        ln,
                        key,
                        &[
                            ("euclidean", ProxKind::Euclidean),
                            ("entropy", ProxKind::Entropy),
                            ("powernorm", ProxKind::PowerNorm),
                        ],
                    )?
                }
                "L0" => c.l0 = positive(parse_field(v, ln, key)?, ln, key)?,
                "delta_rule" => {
                    c.delta_rule = choice(
                        value,
                        ln,
                        key,
                        &[("precise", DeltaRule::Precise), ("coarse", DeltaRule::Coarse)],
                    )?
                }
                "seed" => c.seed = parse_field(v, ln, key)?,
                "max_oracle_calls" => {
                    let n: usize = parse_field(v, ln, key)?;
                    if n == 0 {
                        return Err(Error::Parse {
                            line: ln,
                            message: "max_oracle_calls must be at least 1".into(),
                        });
                    }
                    c.max_oracle_calls = Some(n);
                }
                "stop_rule" => {
                    c.stop_rule = choice(
                        value,
                        ln,
                        key,
                        &[
                            ("certificate", StopKind::Certificate),
                            ("iterations", StopKind::Iterations),
                            ("grad_mapping", StopKind::GradMapping),
                            ("budget", StopKind::Budget),
                        ],
                    )?
                }
                "mu" => {
                    let m: f64 = parse_field(v, ln, key)?;
                    if !(m >= 0.0) || !m.is_finite() {
                        return Err(Error::Parse {
                            line: ln,
                            message: "mu must be non-negative".into(),
                        });
                    }
                    c.mu = m;
                }
                "lipschitz" => c.lipschitz = Some(positive(parse_field(v, ln, key)?, ln, key)?),
                _ => {
                    return Err(Error::Parse {
                        line: ln,
                        message: format!("unknown key '{key}'"),
                    })
                }
            }
        }
        if c.stop_rule == StopKind::Budget && c.max_oracle_calls.is_none() {
            return Err(Error::Config("stop_rule = budget needs max_oracle_calls".into()));
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}
