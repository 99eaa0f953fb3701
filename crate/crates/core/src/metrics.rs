//! Voting baselines and segmentation metrics.
//!
//! Tie conventions: a voxel needs a strict majority (`Σ Y > R/2`) or a
//! weighted vote strictly above one half. Weighted votes within
//! [`WEIGHT_TIE_TOL`] of one half count as ties, so uniform weights
//! reproduce the simple majority exactly despite rounding in `1/R`.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Regulariser added to squared intensity differences.
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Weighted votes this close to 1/2 are treated as ties.
pub const WEIGHT_TIE_TOL: f64 = 1e-12;
const NORMALISED_TOL: f64 = 1e-9;

/// Strict-majority vote over raters; `labels` is `[rater][voxel]`.
pub fn majority_vote(labels: &[Vec<bool>]) -> Vec<bool> {
    let r = labels.len();
    let v = labels.first().map_or(0, Vec::len);
    (0..v).map(|i| 2 * labels.iter().filter(|l| l[i]).count() > r).collect()
}

/// Global weights `∝ (mean_v (i_r − i_t)² + ε)⁻¹`, normalised to sum to one.
pub fn global_weights(rater_intensity: &[Vec<f64>], target_intensity: &[f64], epsilon: f64) -> Vec<f64> {
    let raw: Vec<f64> = rater_intensity
        .iter()
        .map(|ir| {
            let n = target_intensity.len().max(1) as f64;
            let msd = ir.iter().zip(target_intensity).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
            1.0 / (msd + epsilon)
        })
        .collect();
    normalise(raw)
}

/// Per-voxel weights `∝ ((i_r(v) − i_t(v))² + ε)⁻¹`, each row normalised.
/// Returned `[voxel][rater]`.
pub fn local_weights(rater_intensity: &[Vec<f64>], target_intensity: &[f64], epsilon: f64) -> Vec<Vec<f64>> {
    (0..target_intensity.len())
        .map(|v| {
            let raw = rater_intensity
                .iter()
                .map(|ir| {
                    let d = ir[v] - target_intensity[v];
                    1.0 / (d * d + epsilon)
                })
                .collect();
            normalise(raw)
        })
        .collect()
}

fn normalise(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        // All raters coincide with the target where ε = 0: fall back to uniform.
        let n = raw.len() as f64;
        let inf = raw.iter().filter(|w| w.is_infinite()).count();
        return if inf > 0 {
            raw.iter().map(|w| if w.is_infinite() { 1.0 / inf as f64 } else { 0.0 }).collect()
        } else {
            alloc::vec![1.0 / n; raw.len()]
        };
    }
    raw.into_iter().map(|w| w / total).collect()
}

/// Vote weights: one per rater, or one row per voxel.
#[derive(Debug, Clone, PartialEq)]
pub enum VoteWeights<'a> {
    Global(&'a [f64]),
    Local(&'a [Vec<f64>]),
}

/// Include a voxel when `Σ_r w_r Y_r > 1/2`.
pub fn weighted_vote(labels: &[Vec<bool>], weights: VoteWeights<'_>) -> Result<Vec<bool>> {
    let r = labels.len();
    let v = labels.first().map_or(0, Vec::len);
    let check = |w: &[f64]| -> Result<()> {
        if w.len() != r {
            return invalid("weights must have one entry per rater");
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > NORMALISED_TOL || w.iter().any(|x| *x < 0.0) {
            return invalid(alloc::format!("weights must be non-negative and sum to one (sum = {s})"));
        }
        Ok(())
    };
    let vote = |i: usize, w: &[f64]| labels.iter().zip(w).filter(|(l, _)| l[i]).map(|(_, w)| w).sum::<f64>();
    match weights {
        VoteWeights::Global(w) => {
            check(w)?;
            Ok((0..v).map(|i| vote(i, w) - 0.5 > WEIGHT_TIE_TOL).collect())
        }
        VoteWeights::Local(rows) => {
            if rows.len() != v {
                return invalid("local weights must have one row per voxel");
            }
            rows.iter().try_for_each(|w| check(w))?;
            Ok((0..v).map(|i| vote(i, &rows[i]) - 0.5 > WEIGHT_TIE_TOL).collect())
        }
    }
}

/// Dice similarity `2|a ∩ b| / (|a| + |b|)`.
pub fn dice(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return invalid("dice needs masks of equal length");
    }
    let na = a.iter().filter(|x| **x).count();
    let nb = b.iter().filter(|x| **x).count();
    if na + nb == 0 {
        return Err(Error::UndefinedMetric("dice of two empty masks".into()));
    }
    let both = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    Ok(2.0 * both as f64 / (na + nb) as f64)
}

/// Absolute volume difference `|auto − manual| / manual`.
pub fn avd(vol_auto: f64, vol_manual: f64) -> Result<f64> {
    if !(vol_manual > 0.0) {
        return invalid(alloc::format!("manual volume must be positive, got {vol_manual}"));
    }
    if !(vol_auto >= 0.0) {
        return invalid(alloc::format!("automatic volume must be non-negative, got {vol_auto}"));
    }
    Ok((vol_auto - vol_manual).abs() / vol_manual)
}

pub fn volume(mask: &[bool]) -> f64 {
    mask.iter().filter(|x| **x).count() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cols(votes: &[bool]) -> Vec<Vec<bool>> {
        votes.iter().map(|&b| vec![b]).collect()
    }

    #[test]
    fn majority_examples() {
        assert_eq!(majority_vote(&cols(&[true, true, false])), vec![true]);
        assert_eq!(majority_vote(&cols(&[true, true, false, false])), vec![false]);
    }

    #[test]
    fn weight_examples() {
        let t = vec![0.0; 4];
        let w = global_weights(&[vec![1.0, -1.0, 1.0, -1.0], vec![2.0, 2.0, -2.0, 2.0]], &t, 0.0);
        assert!((w[0] - 0.8).abs() < 1e-15 && (w[1] - 0.2).abs() < 1e-15);
        let w = global_weights(&[vec![0.5; 4], vec![0.5; 4], vec![0.5; 4]], &[0.5; 4], DEFAULT_EPSILON);
        assert!(w.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));

        let lw = local_weights(&[vec![1.0], vec![2.0]], &[0.0], 0.0);
        assert!((lw[0][0] - 0.8).abs() < 1e-15 && (lw[0][1] - 0.2).abs() < 1e-15);
        let lw = local_weights(&[vec![3.0], vec![3.0]], &[3.0], DEFAULT_EPSILON);
        assert_eq!(lw[0], vec![0.5, 0.5]);
        let lw = local_weights(&[vec![3.0], vec![3.0]], &[3.0], 0.0);
        assert_eq!(lw[0], vec![0.5, 0.5]);
    }

    #[test]
    fn weighted_vote_examples() {
        let y = cols(&[true, false]);
        assert_eq!(weighted_vote(&y, VoteWeights::Global(&[0.8, 0.2])).unwrap(), vec![true]);
        assert_eq!(weighted_vote(&y, VoteWeights::Global(&[0.5, 0.5])).unwrap(), vec![false]);
        assert!(weighted_vote(&y, VoteWeights::Global(&[0.5, 0.6])).is_err());
        let onehot =
            weighted_vote(&[vec![true, false, true], vec![false, false, true]], VoteWeights::Global(&[0.0, 1.0]))
                .unwrap();
        assert_eq!(onehot, vec![false, false, true]);
    }

    #[test]
    fn dice_and_avd_examples() {
        let a = [true, true, false, false];
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &[false, false, true, true]).unwrap(), 0.0);
        assert_eq!(dice(&a, &[false, true, true, false]).unwrap(), 0.5);
        assert!(matches!(dice(&[false; 3], &[false; 3]), Err(Error::UndefinedMetric(_))));
        assert_eq!(avd(100.0, 100.0).unwrap(), 0.0);
        assert!((avd(116.0, 100.0).unwrap() - 0.16).abs() < 1e-15);
        assert_eq!(avd(50.0, 100.0).unwrap(), 0.5);
        assert!(avd(1.0, 0.0).is_err());
    }
}
