//! Prior-reproduction harness: alternating posterior sweeps with fresh data
//! drawn from the likelihood leaves the prior invariant, so long-run
//! parameter averages must match prior moments.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::LatticeGraph;
use crate::linalg::{Cholesky, Matrix};
use crate::model::{FusionDataset, HyperConfig, ModelState, PriorDelta, Reliability};
use crate::rng::{Stream, StreamKey, StreamKind};

use super::{regenerate_labels, sample_truncated_normal, Sampler, SamplerConfig};

fn aux(seed: u64, block: usize, index: usize) -> Stream {
    StreamKey::new(seed, 0, StreamKind::Auxiliary, block, index).stream()
}

fn gaussian(cov_or_prec: &Cholesky, as_precision: bool, rng: &mut Stream) -> Vec<f64> {
    let z: Vec<f64> = (0..cov_or_prec.dim()).map(|_| rng.normal()).collect();
    if as_precision {
        // Lᵀx = z gives x ~ N(0, (LLᵀ)⁻¹).
        cov_or_prec.backward(&z)
    } else {
        cov_or_prec.lower_mul(&z)
    }
}

/// Draws every parameter from its prior and the labels from the likelihood.
/// Returns the state and `data` with its labels replaced.
pub fn draw_from_prior(
    data: &FusionDataset,
    graph: &LatticeGraph,
    hyper: &HyperConfig,
    seed: u64,
) -> Result<(ModelState, FusionDataset)> {
    let mut data = data.clone();
    let mut s = ModelState::initial(&data, hyper);
    let (n, r_count) = (data.n_voxels(), data.n_raters());
    let link = hyper.link();

    let mut rng = aux(seed, 0, 0);
    s.delta = match hyper.prior_delta() {
        PriorDelta::Gaussian(cov) => gaussian(&Cholesky::new(cov, "delta prior covariance")?, false, &mut rng),
        PriorDelta::Cmp(spec) => {
            // The induced prior is the image of independent Betas under
            // δ = C̃⁻¹ g(p̃).
            let rhs: Vec<f64> = spec
                .beta_shapes
                .iter()
                .map(|&(a, b)| {
                    let x = rng.gamma(a, 1.0);
                    let y = rng.gamma(b, 1.0);
                    link.link(x / (x + y))
                })
                .collect();
            spec.pseudo_design.solve(&rhs).ok_or_else(|| Error::Internal("CMP pseudo design is singular".into()))?
        }
    };
    for r in 0..r_count {
        let mut rng = aux(seed, 1, r);
        for which in [Reliability::Sensitivity, Reliability::Specificity] {
            let (a, b) = hyper.tau_hyper(which);
            let tau = rng.gamma(a, b);
            let mut q = Matrix::zeros(n, n);
            for v in 0..n {
                q[(v, v)] = tau * graph.degree(v) as f64;
                for &u in graph.neighbors(v) {
                    q[(v, u)] = -tau * hyper.rho(which);
                }
            }
            let field = gaussian(&Cholesky::new(&q, "CAR precision")?, true, &mut rng);
            let cov = hyper.coefficient_prior(which);
            let coef = if cov.rows() == 0 {
                Vec::new()
            } else {
                gaussian(&Cholesky::new(cov, "coefficient prior")?, false, &mut rng)
            };
            match which {
                Reliability::Sensitivity => {
                    s.tau_phi[r] = tau;
                    s.phi[r] = field;
                    s.beta[r] = coef;
                }
                Reliability::Specificity => {
                    s.tau_eta[r] = tau;
                    s.eta[r] = field;
                    s.gamma[r] = coef;
                }
            }
        }
    }
    let mut rng = aux(seed, 2, 0);
    for v in 0..n {
        s.t[v] = rng.uniform() < link.inverse(s.true_status_predictor(&data, v));
    }
    for r in 0..r_count {
        let mut rng = aux(seed, 3, r);
        for v in 0..n {
            // Active latent value first; its sign fixes the label.
            let y = if s.t[v] {
                let z1 = s.reliability_predictor(&data, Reliability::Sensitivity, v, r) + rng.normal();
                s.zeta1[r][v] = z1;
                z1 >= 0.0
            } else {
                let z0 = s.reliability_predictor(&data, Reliability::Specificity, v, r) + rng.normal();
                s.zeta0[r][v] = z0;
                z0 < 0.0
            };
            data.labels[r][v] = y;
            let (lo, hi) = if y { (0.0, f64::INFINITY) } else { (f64::NEG_INFINITY, 0.0) };
            if s.t[v] {
                s.zeta0[r][v] = sample_truncated_normal(0.0, 1.0, -hi, -lo, &mut rng)?;
            } else {
                s.zeta1[r][v] = sample_truncated_normal(0.0, 1.0, lo, hi, &mut rng)?;
            }
        }
    }
    Ok((s, data))
}

/// Parameter traces from [`prior_reproduction`], one entry per alternation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriorReproduction {
    pub delta: Vec<Vec<f64>>,
    pub tau_phi: Vec<Vec<f64>>,
    pub tau_eta: Vec<Vec<f64>>,
    /// `Σ_v T_v`.
    pub volume: Vec<f64>,
    pub acceptance_rate_delta: f64,
}

/// Starts from a joint prior draw and alternates one full sweep with a
/// regeneration of the labels, `n` times. `data` supplies the lattice size
/// and covariates; its labels are ignored.
pub fn prior_reproduction(
    data: &FusionDataset,
    graph: &LatticeGraph,
    hyper: &HyperConfig,
    n: usize,
    seed: u64,
) -> Result<PriorReproduction> {
    let (state, mut current) = draw_from_prior(data, graph, hyper, seed)?;
    let config = SamplerConfig {
        n_iterations: n.max(1),
        burn_in: 0,
        thin: 1,
        rng_seed: seed,
        n_workers: 1,
        update_beta_gamma: data.n_sens_covariates() + data.n_spec_covariates() > 0,
        ..SamplerConfig::default()
    };
    let mut sampler = Sampler::new(data, graph, hyper, config)?.with_state(state)?;
    let mut out = PriorReproduction {
        delta: Vec::with_capacity(n),
        tau_phi: Vec::with_capacity(n),
        tau_eta: Vec::with_capacity(n),
        volume: Vec::with_capacity(n),
        acceptance_rate_delta: 0.0,
    };
    for _ in 0..n {
        sampler.sweep_with_data(&current)?;
        regenerate_labels(sampler.state(), &mut current, seed, sampler.sweeps());
        let s = sampler.state();
        out.delta.push(s.delta.clone());
        out.tau_phi.push(s.tau_phi.clone());
        out.tau_eta.push(s.tau_eta.clone());
        out.volume.push(s.t.iter().filter(|t| **t).count() as f64);
    }
    out.acceptance_rate_delta = sampler.acceptance_rate_delta();
    Ok(out)
}

impl PriorReproduction {
    /// Column `j` of a per-iteration vector trace.
    pub fn column(trace: &[Vec<f64>], j: usize) -> Vec<f64> {
        trace.iter().map(|x| x[j]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn prior_draw_is_sign_consistent() {
        let graph = LatticeGraph::new(3, 3).unwrap();
        let data = FusionDataset::new(
            vec![vec![false; 9]; 2],
            vec![0.0; 9],
            vec![vec![0.0; 9]; 2],
            Matrix::from_row_major(9, 1, vec![1.0; 9]).unwrap(),
        )
        .unwrap();
        let hyper = HyperConfig::for_dataset(&data);
        for seed in 0..20 {
            let (s, d) = draw_from_prior(&data, &graph, &hyper, seed).unwrap();
            assert!(s.sign_consistent(&d));
            assert!(s.tau_phi.iter().chain(&s.tau_eta).all(|t| *t > 0.0));
        }
    }
}
