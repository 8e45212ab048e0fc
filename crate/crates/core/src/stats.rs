//! Log-log slope fits for complexity sweeps.

use crate::error::{Error, Result};

/// Least-squares line through `(ln(1/ε), ln N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_loglog(eps: &[f64], counts: &[f64]) -> Result<SlopeFit> {
    if eps.len() != counts.len() || eps.len() < 2 {
        return Err(Error::Domain("slope fit needs at least two matching points".into()));
    }
    if eps.iter().chain(counts).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("slope fit needs positive values".into()));
    }
    let xs: Vec<f64> = eps.iter().map(|e| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|c| c.ln()).collect();
    fit_line(&xs, &ys)
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("slope fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

/// Median of a non-empty sample.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
