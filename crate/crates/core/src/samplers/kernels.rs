//! Gibbs kernels for `T`, `ζ`, the CAR fields, their precisions and the
//! reliability coefficients.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::{Coloring, LatticeGraph};
use crate::linalg::{Cholesky, Matrix};
use crate::math::{prob_from_log_odds, sqrt};
use crate::model::{
    label_log_lik, ln_phi_clamped, ln_prior_odds_parts, offset, FusionDataset, HyperConfig, ModelState, Reliability,
};
use crate::rng::{StreamKey, StreamKind};

use super::truncnorm::sample_truncated_normal;
use super::WorkerPool;

/// Log odds of `T_v = 1` given everything except `ζ`:
/// `ln p_v − ln(1 − p_v) + Σ_r [ln P(Y_vr | T=1) − ln P(Y_vr | T=0)]`.
pub fn true_status_log_odds(v: usize, state: &ModelState, data: &FusionDataset, hyper: &HyperConfig) -> f64 {
    let u = state.true_status_predictor(data, v);
    let (ln_p, ln_q) = ln_prior_odds_parts(hyper.link(), u);
    let mut lo = ln_p - ln_q;
    for r in 0..data.n_raters() {
        let sens = state.reliability_predictor(data, Reliability::Sensitivity, v, r);
        let spec = state.reliability_predictor(data, Reliability::Specificity, v, r);
        let y = data.labels[r][v];
        lo += label_log_lik(y, true, sens, spec) - label_log_lik(y, false, sens, spec);
    }
    lo
}

/// `P(T_v = 1 | ω, Y)`, the Rao-Blackwell conditional.
pub fn true_status_prob(v: usize, state: &ModelState, data: &FusionDataset, hyper: &HyperConfig) -> f64 {
    prob_from_log_odds(true_status_log_odds(v, state, data, hyper))
}

/// Every `P(T_v = 1 | ω, Y)`.
pub fn true_status_probs(state: &ModelState, data: &FusionDataset, hyper: &HyperConfig) -> Vec<f64> {
    (0..data.n_voxels()).map(|v| true_status_prob(v, state, data, hyper)).collect()
}

/// Draws every `T_v` independently with `ζ` marginalised out. Must be
/// followed by [`update_zeta`].
pub fn update_t(state: &mut ModelState, data: &FusionDataset, hyper: &HyperConfig, seed: u64, sweep: u64) {
    for v in 0..data.n_voxels() {
        let p = true_status_prob(v, state, data, hyper);
        let mut rng = StreamKey::new(seed, sweep, StreamKind::TrueLabels, 0, v).stream();
        state.t[v] = rng.bernoulli(p);
    }
}

/// Redraws both augmentation layers from their truncated normals.
pub fn update_zeta(state: &mut ModelState, data: &FusionDataset, seed: u64, sweep: u64) -> Result<()> {
    const POS: (f64, f64) = (0.0, f64::INFINITY);
    const NEG: (f64, f64) = (f64::NEG_INFINITY, 0.0);
    for r in 0..data.n_raters() {
        for v in 0..data.n_voxels() {
            let y = data.labels[r][v];
            let t = state.t[v];
            let m1 = if t { state.reliability_predictor(data, Reliability::Sensitivity, v, r) } else { 0.0 };
            let m0 = if t { 0.0 } else { state.reliability_predictor(data, Reliability::Specificity, v, r) };
            let (lo1, hi1) = if y { POS } else { NEG };
            let (lo0, hi0) = if y { NEG } else { POS };
            let mut s1 = StreamKey::new(seed, sweep, StreamKind::Zeta1, r, v).stream();
            let mut s0 = StreamKey::new(seed, sweep, StreamKind::Zeta0, r, v).stream();
            state.zeta1[r][v] = sample_truncated_normal(m1, 1.0, lo1, hi1, &mut s1)?;
            state.zeta0[r][v] = sample_truncated_normal(m0, 1.0, lo0, hi0, &mut s0)?;
        }
    }
    debug_assert!(state.sign_consistent(data));
    Ok(())
}

/// Single-site full conditional `(mean, variance)` of `φ_vr` or `η_vr`,
/// using the current values of the neighbours.
pub fn spatial_conditional(
    which: Reliability,
    r: usize,
    v: usize,
    state: &ModelState,
    data: &FusionDataset,
    graph: &LatticeGraph,
    hyper: &HyperConfig,
) -> Result<(f64, f64)> {
    let w = graph.degree(v) as f64;
    if w == 0.0 {
        return Err(Error::DegenerateVoxel { voxel: v });
    }
    let rho = hyper.rho(which);
    let (active, field, zeta, resid_offset, tau) = match which {
        Reliability::Sensitivity => (
            state.t[v],
            &state.phi[r],
            state.zeta1[r][v],
            offset(&data.sens_design[r], &state.beta[r], v),
            state.tau_phi[r],
        ),
        Reliability::Specificity => (
            !state.t[v],
            &state.eta[r],
            state.zeta0[r][v],
            offset(&data.spec_design[r], &state.gamma[r], v),
            state.tau_eta[r],
        ),
    };
    let a = if active { 1.0 } else { 0.0 };
    let var = 1.0 / (a + tau * w);
    let mean = var * (a * (zeta - resid_offset) + rho * tau * graph.neighbor_sum(field, v));
    Ok((mean, var))
}

/// Chromatic update of `φ_r` or `η_r`: colour classes in fixed order, every
/// voxel of a class drawn from its conditional given the current field.
#[allow(clippy::too_many_arguments)]
pub fn update_spatial_field(
    which: Reliability,
    r: usize,
    state: &mut ModelState,
    data: &FusionDataset,
    graph: &LatticeGraph,
    coloring: &Coloring,
    hyper: &HyperConfig,
    seed: u64,
    sweep: u64,
    pool: &WorkerPool,
) -> Result<()> {
    if let Some(v) = graph.first_isolated() {
        return Err(Error::DegenerateVoxel { voxel: v });
    }
    let kind = match which {
        Reliability::Sensitivity => StreamKind::Phi,
        Reliability::Specificity => StreamKind::Eta,
    };
    for class in &coloring.classes {
        let draw = |v: usize| -> Result<f64> {
            let (mean, var) = spatial_conditional(which, r, v, state, data, graph, hyper)?;
            let mut rng = StreamKey::new(seed, sweep, kind, r, v).stream();
            Ok(mean + sqrt(var) * rng.normal())
        };
        let values = pool.map(class, draw)?;
        let field = match which {
            Reliability::Sensitivity => &mut state.phi[r],
            Reliability::Specificity => &mut state.eta[r],
        };
        for (&v, x) in class.iter().zip(values) {
            field[v] = x;
        }
    }
    Ok(())
}

/// Shape and rate of the Gamma full conditional of `τ_φr` or `τ_ηr`.
pub fn tau_conditional(
    which: Reliability,
    r: usize,
    state: &ModelState,
    graph: &LatticeGraph,
    hyper: &HyperConfig,
) -> Result<(f64, f64)> {
    let field = match which {
        Reliability::Sensitivity => &state.phi[r],
        Reliability::Specificity => &state.eta[r],
    };
    let q = graph.car_quadratic_form(field, hyper.rho(which));
    let scale: f64 = (0..graph.len()).map(|v| graph.degree(v) as f64 * field[v] * field[v]).sum();
    if q < -1e-10 * scale.max(f64::MIN_POSITIVE) || !q.is_finite() {
        return Err(Error::Internal(alloc::format!("CAR quadratic form is negative ({q:e})")));
    }
    let (a, b) = hyper.tau_hyper(which);
    Ok((a + 0.5 * graph.len() as f64, b + 0.5 * q.max(0.0)))
}

pub fn update_tau(
    which: Reliability,
    r: usize,
    state: &mut ModelState,
    graph: &LatticeGraph,
    hyper: &HyperConfig,
    seed: u64,
    sweep: u64,
) -> Result<()> {
    let (shape, rate) = tau_conditional(which, r, state, graph, hyper)?;
    let kind = match which {
        Reliability::Sensitivity => StreamKind::TauPhi,
        Reliability::Specificity => StreamKind::TauEta,
    };
    let mut rng = StreamKey::new(seed, sweep, kind, r, 0).stream();
    let tau = rng.gamma(shape, rate);
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::NumericalOverflow { component: "field precision draw" });
    }
    match which {
        Reliability::Sensitivity => state.tau_phi[r] = tau,
        Reliability::Specificity => state.tau_eta[r] = tau,
    }
    Ok(())
}

/// Conjugate Gaussian conditional of `β_r` (or `γ_r`): its precision
/// `Σ⁻¹ + Xᵀ𝒯X` factorised, and the mean. `None` when the design is empty.
pub fn coefficient_conditional(
    which: Reliability,
    r: usize,
    state: &ModelState,
    data: &FusionDataset,
    hyper: &HyperConfig,
) -> Result<Option<(Cholesky, Vec<f64>)>> {
    let (design, field, zeta): (&Matrix, &[f64], &[f64]) = match which {
        Reliability::Sensitivity => (&data.sens_design[r], &state.phi[r], &state.zeta1[r]),
        Reliability::Specificity => (&data.spec_design[r], &state.eta[r], &state.zeta0[r]),
    };
    let l = design.cols();
    if l == 0 {
        return Ok(None);
    }
    let mut prec = hyper.coefficient_prior(which).inverse_spd("coefficient prior covariance")?;
    let mut rhs = alloc::vec![0.0; l];
    for v in 0..data.n_voxels() {
        let active = match which {
            Reliability::Sensitivity => state.t[v],
            Reliability::Specificity => !state.t[v],
        };
        if !active {
            continue;
        }
        let x = design.row(v);
        let resid = zeta[v] - field[v];
        for i in 0..l {
            rhs[i] += x[i] * resid;
            for j in 0..l {
                prec[(i, j)] += x[i] * x[j];
            }
        }
    }
    let what = match which {
        Reliability::Sensitivity => "beta full-conditional precision",
        Reliability::Specificity => "gamma full-conditional precision",
    };
    let chol = Cholesky::new(&prec, what)?;
    let mean = chol.solve(&rhs);
    Ok(Some((chol, mean)))
}

pub fn update_coefficients(
    which: Reliability,
    r: usize,
    state: &mut ModelState,
    data: &FusionDataset,
    hyper: &HyperConfig,
    seed: u64,
    sweep: u64,
) -> Result<()> {
    let Some((chol, mean)) = coefficient_conditional(which, r, state, data, hyper)? else {
        return Ok(());
    };
    let kind = match which {
        Reliability::Sensitivity => StreamKind::Beta,
        Reliability::Specificity => StreamKind::Gamma,
    };
    let mut rng = StreamKey::new(seed, sweep, kind, r, 0).stream();
    let z: Vec<f64> = (0..mean.len()).map(|_| rng.normal()).collect();
    let noise = chol.backward(&z);
    let draw: Vec<f64> = mean.iter().zip(noise).map(|(m, e)| m + e).collect();
    match which {
        Reliability::Sensitivity => state.beta[r] = draw,
        Reliability::Specificity => state.gamma[r] = draw,
    }
    Ok(())
}

/// Draws fresh labels `Y_vr ~ Bern(p*(v, r))` from the current state.
pub fn regenerate_labels(state: &ModelState, data: &mut FusionDataset, seed: u64, sweep: u64) {
    for r in 0..data.n_raters() {
        for v in 0..data.n_voxels() {
            let mut rng = StreamKey::new(seed, sweep, StreamKind::Regenerate, r, v).stream();
            let y = if state.t[v] {
                ln_phi_clamped(state.reliability_predictor(data, Reliability::Sensitivity, v, r))
            } else {
                ln_phi_clamped(-state.reliability_predictor(data, Reliability::Specificity, v, r))
            };
            data.labels[r][v] = crate::math::log(rng.uniform()) < y;
        }
    }
}
