//! Error statistics, histograms and log-normal fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `eta_j = sum_i || x_i(T) - h_j * 1 ||_1`.
pub fn picture_error(outputs: &[Vec<f64>], target: f64) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::Dimension("no outputs to score".into()));
    }
    if !target.is_finite() {
        return Err(Error::Domain(format!("target {target} is not finite")));
    }
    Ok(outputs
        .iter()
        .flat_map(|x| x.iter().map(|v| (v - target).abs()))
        .sum())
}

/// Sample mean and population (1/P) variance.
pub fn aggregate_errors(etas: &[f64]) -> Result<(f64, f64)> {
    if etas.is_empty() {
        return Err(Error::Dimension("no errors to aggregate".into()));
    }
    let p = etas.len() as f64;
    let mean = etas.iter().sum::<f64>() / p;
    let theta = etas.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / p;
    Ok((mean, theta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub per_picture: Vec<(String, f64)>,
    pub eta_bar: f64,
    pub theta: f64,
    #[serde(rename = "P")]
    pub pictures: usize,
}

impl ErrorReport {
    pub fn new(per_picture: Vec<(String, f64)>) -> Result<Self> {
        let etas: Vec<f64> = per_picture.iter().map(|(_, e)| *e).collect();
        let (eta_bar, theta) = aggregate_errors(&etas)?;
        Ok(ErrorReport {
            pictures: per_picture.len(),
            per_picture,
            eta_bar,
            theta,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `(left, right, count)` per bin.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.edges
            .windows(2)
            .zip(&self.counts)
            .map(|(e, &c)| (e[0], e[1], c))
    }
}

/// Equal-width bins over `[min, max]`; bins are right-open except the last.
/// A constant sample yields one bin around the value.
pub fn histogram(values: &[f64], bin_count: usize) -> Result<Histogram> {
    if bin_count == 0 {
        return Err(Error::Domain("bin_count must be >= 1".into()));
    }
    if values.is_empty() {
        return Err(Error::Dimension("no values to bin".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("histogram values must be finite".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        let pad = (lo.abs() * 1e-9).max(1e-12);
        return Ok(Histogram {
            edges: vec![lo - pad, hi + pad],
            counts: vec![values.len()],
        });
    }
    let width = (hi - lo) / bin_count as f64;
    let mut edges: Vec<f64> = (0..bin_count).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);
    let mut counts = vec![0; bin_count];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bin_count - 1);
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Log-space mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalFit {
    pub mu: f64,
    pub s: f64,
}

impl LognormalFit {
    pub fn median(&self) -> f64 {
        self.mu.exp()
    }

    pub fn mean(&self) -> f64 {
        (self.mu + 0.5 * self.s * self.s).exp()
    }
}

/// Log-moment matching: `mu = mean(ln v)`, `s` = population std of `ln v`.
pub fn fit_lognormal(values: &[f64]) -> Result<LognormalFit> {
    if values.len() < 2 {
        return Err(Error::Dimension(
            "log-normal fit needs at least two values".into(),
        ));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Domain(format!(
            "log-normal fit needs positive values, got {v}"
        )));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (mu, var) = aggregate_errors(&logs)?;
    let s = var.sqrt();
    if !(s > 1e-12 * mu.abs().max(1.0)) {
        return Err(Error::DegenerateData(
            "log-normal fit of a constant sample".into(),
        ));
    }
    Ok(LognormalFit { mu, s })
}
