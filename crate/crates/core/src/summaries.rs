//! Posterior summaries built from the retained chain output.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::math::sqrt;
use crate::samplers::ChainOutput;

/// Rao-Blackwellised inclusion probabilities with pointwise spread.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub n_samples: usize,
}

/// Averages the stored `P(T_v = 1 | ω⁽ᵏ⁾, Y)`; `sd` uses the `n − 1`
/// denominator and is zero for a single sample.
pub fn rb_probability_map(chain: &ChainOutput) -> Result<ProbabilityMap> {
    probability_map_from_samples(&chain.rb_prob_samples)
}

pub fn probability_map_from_samples(samples: &[Vec<f64>]) -> Result<ProbabilityMap> {
    let n = samples.len();
    if n == 0 {
        return invalid("probability map needs at least one retained sample");
    }
    let v = samples[0].len();
    let mut mean = alloc::vec![0.0; v];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut sd = alloc::vec![0.0; v];
    if n > 1 {
        for s in samples {
            for ((acc, x), m) in sd.iter_mut().zip(s).zip(&mean) {
                *acc += (x - m) * (x - m);
            }
        }
        sd.iter_mut().for_each(|a| *a = sqrt(*a / (n - 1) as f64));
    }
    // Averages of values in [0, 1] can overshoot by an ulp.
    mean.iter_mut().for_each(|m| *m = m.clamp(0.0, 1.0));
    Ok(ProbabilityMap { mean, sd, n_samples: n })
}

/// `mean ≥ t`, ties included.
pub fn threshold_map(map: &ProbabilityMap, t: f64) -> Result<Vec<bool>> {
    if !(t > 0.0 && t < 1.0) {
        return invalid(alloc::format!("threshold must lie in (0, 1), got {t}"));
    }
    Ok(map.mean.iter().map(|&m| m >= t).collect())
}

/// The stored volume draws `M⁽ᵏ⁾ = Σ_v P(T_v = 1 | ω⁽ᵏ⁾, Y)`.
pub fn volume_distribution(chain: &ChainOutput) -> Result<Vec<f64>> {
    if chain.volume_samples.is_empty() {
        return invalid("volume distribution needs a non-empty chain");
    }
    Ok(chain.volume_samples.clone())
}

/// Linear-interpolation quantile of sorted data (`h = (n − 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    let (a, b) = (sorted[lo], sorted[hi]);
    if a == b {
        a
    } else {
        a + frac * (b - a)
    }
}

pub fn quantile_unsorted(data: &[f64], p: f64) -> f64 {
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

/// Equal-tailed interval at `(1 − level)/2` and `1 − (1 − level)/2`.
pub fn credible_interval(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return invalid(alloc::format!("credible level must lie in (0, 1), got {level}"));
    }
    if samples.len() < 2 {
        return invalid("credible interval needs at least two samples");
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    Ok((quantile_sorted(&sorted, tail), quantile_sorted(&sorted, 1.0 - tail)))
}
