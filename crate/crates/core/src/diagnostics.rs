//! Single-chain convergence diagnostics for scalar traces.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math::{floor, sqrt};

pub const DEFAULT_FIRST_FRACTION: f64 = 0.1;
pub const DEFAULT_LAST_FRACTION: f64 = 0.5;
const MIN_GEWEKE_LEN: usize = 100;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Variance of the segment mean from non-overlapping batch means with
/// `⌊√n⌋` batches (the spectral density at zero divided by `n`).
fn batch_means_var_of_mean(xs: &[f64]) -> f64 {
    let n = xs.len();
    let n_batches = (floor(sqrt(n as f64)) as usize).max(2);
    let size = n / n_batches;
    let used = &xs[..n_batches * size];
    let grand = mean(used);
    let ss: f64 = used
        .chunks_exact(size)
        .map(|b| {
            let d = mean(b) - grand;
            d * d
        })
        .sum();
    // Batch-mean variance estimates Var(mean of `size`) ; scale to the full segment.
    let var_batch_mean = ss / (n_batches - 1) as f64;
    var_batch_mean * size as f64 / n as f64
}

/// Geweke z-score comparing the first `frac_first` and last `frac_last` of a
/// trace.
pub fn geweke_z(trace: &[f64], frac_first: f64, frac_last: f64) -> Result<f64> {
    if trace.len() < MIN_GEWEKE_LEN {
        return invalid(alloc::format!("Geweke needs at least {MIN_GEWEKE_LEN} values, got {}", trace.len()));
    }
    if !(frac_first > 0.0 && frac_first < 1.0 && frac_last > 0.0 && frac_last < 1.0) || frac_first + frac_last > 1.0 {
        return invalid("Geweke fractions must lie in (0, 1) and sum to at most 1");
    }
    let n = trace.len();
    let n_a = (frac_first * n as f64) as usize;
    let n_b = (frac_last * n as f64) as usize;
    let a = &trace[..n_a];
    let b = &trace[n - n_b..];
    let var = batch_means_var_of_mean(a) + batch_means_var_of_mean(b);
    if !(var > 0.0) {
        return Err(Error::DegenerateTrace("both Geweke segments have zero variance".into()));
    }
    Ok((mean(a) - mean(b)) / sqrt(var))
}

/// Lag-1 sample autocorrelation with the biased `1/n` normalisation.
pub fn lag1_autocorr(trace: &[f64]) -> Result<f64> {
    if trace.len() < 3 {
        return invalid("lag-1 autocorrelation needs at least three values");
    }
    let m = mean(trace);
    let denom: f64 = trace.iter().map(|x| (x - m) * (x - m)).sum();
    if !(denom > 0.0) {
        return Err(Error::DegenerateTrace("trace has zero variance".into()));
    }
    let num: f64 = trace.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    Ok((num / denom).clamp(-1.0, 1.0))
}

/// One row of a diagnostics report; `None` marks a degenerate trace.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TraceDiagnostic {
    pub param: String,
    pub geweke_z: Option<f64>,
    pub lag1: Option<f64>,
}

pub fn diagnose(param: impl Into<String>, trace: &[f64]) -> TraceDiagnostic {
    TraceDiagnostic {
        param: param.into(),
        geweke_z: geweke_z(trace, DEFAULT_FIRST_FRACTION, DEFAULT_LAST_FRACTION).ok(),
        lag1: lag1_autocorr(trace).ok(),
    }
}

/// Monte Carlo standard error of a trace mean by batch means.
pub fn mcse(trace: &[f64]) -> f64 {
    sqrt(batch_means_var_of_mean(trace))
}

/// Named scalar traces from a chain: `delta_j`, `tau_phi_r`, `tau_eta_r`, `volume`.
pub fn chain_traces(chain: &crate::samplers::ChainOutput) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    let j = chain.delta_samples.first().map_or(0, Vec::len);
    for k in 0..j {
        out.push((alloc::format!("delta_{}", k + 1), chain.delta_samples.iter().map(|d| d[k]).collect()));
    }
    let r = chain.tau_phi_samples.first().map_or(0, Vec::len);
    for k in 0..r {
        out.push((alloc::format!("tau_phi_{}", k + 1), chain.tau_phi_samples.iter().map(|d| d[k]).collect()));
    }
    for k in 0..r {
        out.push((alloc::format!("tau_eta_{}", k + 1), chain.tau_eta_samples.iter().map(|d| d[k]).collect()));
    }
    out.push((String::from("volume"), chain.volume_samples.clone()));
    out
}
