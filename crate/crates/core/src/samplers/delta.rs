//! Metropolis-Hastings step for `δ` with the IRLS (Gamerman) proposal.

use alloc::vec::Vec;

use crate::error::Result;
use crate::linalg::{dot, Cholesky, Matrix};
use crate::math::{clamp_prob, log, normal_cdf, normal_pdf, sigmoid, PROB_FLOOR};
use crate::model::{FusionDataset, HyperConfig, LinkFunction, PriorDelta, LN_PROB_FLOOR};
use crate::rng::{StreamKey, StreamKind};

/// `N(mean, precision⁻¹)` proposal built at one point.
#[derive(Debug, Clone)]
pub struct GamermanProposal {
    pub mean: Vec<f64>,
    pub precision: Cholesky,
}

impl GamermanProposal {
    /// `ln N(x; mean, precision⁻¹)` without the `2π` constant.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        0.5 * self.precision.log_det() - 0.5 * self.precision.quad_form(&d)
    }
}

/// IRLS weight `Q` and the product `Q·z̃` for response `y` at predictor `u`,
/// with `z̃ = u + (y − p) ġ(p)`. The product is formed directly so that it
/// stays finite when `Q` underflows.
fn irls_terms(link: LinkFunction, u: f64, y: f64) -> (f64, f64) {
    match link {
        LinkFunction::Logistic => {
            let p = clamp_prob(sigmoid(u));
            let q = p * (1.0 - p);
            (q, q * u + (y - p))
        }
        LinkFunction::Probit => {
            let p = clamp_prob(normal_cdf(u));
            let d = normal_pdf(u).max(PROB_FLOOR);
            let b2 = p * (1.0 - p);
            let q = d * d / b2;
            (q, q * u + d * (y - p) / b2)
        }
    }
}

/// Proposal at `delta` for the current labels `t`. A Gaussian prior adds
/// `Σ_δ⁻¹` to the precision; a CMP instead appends its pseudo rows as
/// observations with response `ã/(ã + b̃)` and weight `ã + b̃`.
pub fn gamerman_proposal(
    delta: &[f64],
    t: &[bool],
    data: &FusionDataset,
    hyper: &HyperConfig,
) -> Result<GamermanProposal> {
    let j = delta.len();
    let link = hyper.link();
    let mut prec = match hyper.delta_precision() {
        Some(p) => p.clone(),
        None => Matrix::zeros(j, j),
    };
    let mut rhs = alloc::vec![0.0; j];
    let mut add_row = |c: &[f64], y: f64, weight: f64| {
        let (q, qz) = irls_terms(link, dot(c, delta), y);
        let (q, qz) = (weight * q, weight * qz);
        for a in 0..j {
            rhs[a] += c[a] * qz;
            for b in 0..j {
                prec[(a, b)] += q * c[a] * c[b];
            }
        }
    };
    for (v, &tv) in t.iter().enumerate() {
        add_row(data.design.row(v), if tv { 1.0 } else { 0.0 }, 1.0);
    }
    if let PriorDelta::Cmp(spec) = hyper.prior_delta() {
        for (k, &(a, b)) in spec.beta_shapes.iter().enumerate() {
            add_row(spec.pseudo_design.row(k), a / (a + b), a + b);
        }
    }
    let precision = Cholesky::new(&prec, "Gamerman proposal precision")?;
    let mean = precision.solve(&rhs);
    Ok(GamermanProposal { mean, precision })
}

/// `ln p(δ | T)` up to a constant: Bernoulli regression plus the prior.
pub fn delta_log_target(delta: &[f64], t: &[bool], data: &FusionDataset, hyper: &HyperConfig) -> f64 {
    let link = hyper.link();
    let lik: f64 = t
        .iter()
        .enumerate()
        .map(|(v, &tv)| {
            let u = dot(data.design.row(v), delta);
            let l = if tv { link.ln_inverse(u) } else { link.ln_inverse_complement(u) };
            l.max(LN_PROB_FLOOR)
        })
        .sum();
    lik + hyper.delta_log_prior(delta)
}

/// Log Hastings ratio for moving from `current` to `proposed`; both
/// proposals are rebuilt at their own starting points.
pub fn log_acceptance_ratio(
    current: &[f64],
    proposed: &[f64],
    t: &[bool],
    data: &FusionDataset,
    hyper: &HyperConfig,
) -> Result<f64> {
    let fwd = gamerman_proposal(current, t, data, hyper)?;
    let rev = gamerman_proposal(proposed, t, data, hyper)?;
    Ok(log_ratio_with(current, proposed, &fwd, &rev, t, data, hyper))
}

fn log_ratio_with(
    current: &[f64],
    proposed: &[f64],
    fwd: &GamermanProposal,
    rev: &GamermanProposal,
    t: &[bool],
    data: &FusionDataset,
    hyper: &HyperConfig,
) -> f64 {
    delta_log_target(proposed, t, data, hyper) - delta_log_target(current, t, data, hyper) + rev.log_density(current)
        - fwd.log_density(proposed)
}

/// One MH step; returns whether the proposal was accepted.
pub fn update_delta_gamerman(
    delta: &mut Vec<f64>,
    t: &[bool],
    data: &FusionDataset,
    hyper: &HyperConfig,
    seed: u64,
    sweep: u64,
) -> Result<bool> {
    let fwd = gamerman_proposal(delta, t, data, hyper)?;
    let mut rng = StreamKey::new(seed, sweep, StreamKind::Delta, 0, 0).stream();
    let z: Vec<f64> = (0..delta.len()).map(|_| rng.normal()).collect();
    let noise = fwd.precision.backward(&z);
    let proposed: Vec<f64> = fwd.mean.iter().zip(noise).map(|(m, e)| m + e).collect();
    let rev = match gamerman_proposal(&proposed, t, data, hyper) {
        Ok(p) => p,
        // A proposal whose reverse move is undefined has zero reverse density.
        Err(_) => return Ok(false),
    };
    let log_alpha = log_ratio_with(delta, &proposed, &fwd, &rev, t, data, hyper);
    let accept = log_alpha >= 0.0 || log(rng.uniform()) < log_alpha;
    if accept {
        *delta = proposed;
    }
    Ok(accept)
}
