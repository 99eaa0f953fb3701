//! Model state, data, hyperparameters and the joint log density.
//!
//! Conventions: per-rater quantities are stored rater-major (`[r][v]`), the
//! CAR fields are mean-zero and the covariate effects `xᵀβ`, `zᵀγ` enter only
//! inside the probit links for sensitivity and specificity.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::LatticeGraph;
use crate::linalg::{dot, Cholesky, Matrix};
use crate::math::{
    clamp_prob, exp, ln_normal_pdf, log, normal_cdf, normal_pdf, normal_quantile, normal_sf, sigmoid, softplus,
    PROB_FLOOR,
};
use crate::priors::{cmp_log_prior, CmpSpec};

/// Link `g` for the true-status regression `P(T_v = 1 | δ) = g⁻¹(c_vᵀδ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkFunction {
    #[default]
    Logistic,
    Probit,
}

/// `ln Φ(x)` with an asymptotic tail below −20.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > -20.0 {
        return log(normal_cdf(x));
    }
    let z2 = 1.0 / (x * x);
    let series = 1.0 - z2 * (1.0 - z2 * (3.0 - z2 * (15.0 - 105.0 * z2)));
    ln_normal_pdf(x) - log(-x) + log(series)
}

impl LinkFunction {
    /// `g⁻¹(u)`, kept strictly inside `(0, 1)` where binary64 would round
    /// to an endpoint.
    #[inline]
    pub fn inverse(self, u: f64) -> f64 {
        let p = match self {
            Self::Logistic => sigmoid(u),
            Self::Probit => normal_cdf(u),
        };
        p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
    }

    /// `g(p)`.
    pub fn link(self, p: f64) -> f64 {
        match self {
            Self::Logistic => log(p) - libm::log1p(-p),
            Self::Probit => normal_quantile(p),
        }
    }

    /// `ln g⁻¹(u)`, stable in both tails.
    #[inline]
    pub fn ln_inverse(self, u: f64) -> f64 {
        match self {
            Self::Logistic => -softplus(-u),
            Self::Probit => ln_normal_cdf(u),
        }
    }

    /// `ln(1 − g⁻¹(u))`.
    #[inline]
    pub fn ln_inverse_complement(self, u: f64) -> f64 {
        match self {
            Self::Logistic => -softplus(u),
            Self::Probit => ln_normal_cdf(-u),
        }
    }

    /// `ġ⁻¹(u)`, the derivative of the inverse link.
    pub fn inverse_deriv(self, u: f64) -> f64 {
        exp(self.ln_inverse_deriv(u))
    }

    pub fn ln_inverse_deriv(self, u: f64) -> f64 {
        match self {
            Self::Logistic => -softplus(u) - softplus(-u),
            Self::Probit => ln_normal_pdf(u),
        }
    }

    /// `ġ(p)`, the derivative of the link at a probability.
    pub fn link_deriv(self, p: f64) -> f64 {
        match self {
            Self::Logistic => 1.0 / (p * (1.0 - p)),
            Self::Probit => 1.0 / normal_pdf(normal_quantile(p)),
        }
    }

    /// `d/du ln g⁻¹(u)`.
    pub fn d_ln_inverse(self, u: f64) -> f64 {
        match self {
            Self::Logistic => sigmoid(-u),
            Self::Probit => exp(ln_normal_pdf(u) - ln_normal_cdf(u)),
        }
    }

    /// `d/du ln(1 − g⁻¹(u))`.
    pub fn d_ln_inverse_complement(self, u: f64) -> f64 {
        match self {
            Self::Logistic => -sigmoid(u),
            Self::Probit => -exp(ln_normal_pdf(u) - ln_normal_cdf(-u)),
        }
    }

    /// `d/du ln ġ⁻¹(u)`.
    pub fn d_ln_inverse_deriv(self, u: f64) -> f64 {
        match self {
            Self::Logistic => 1.0 - 2.0 * sigmoid(u),
            Self::Probit => -u,
        }
    }

    /// IRLS quantities at linear predictor `u` for a response `y ∈ [0, 1]`:
    /// the working response `u + (y − p) ġ(p)` and the weight
    /// `Q = 1 / (b̈(θ) ġ(p)²)` with `θ = logit p`, `b̈(θ) = p(1 − p)`.
    pub fn working_response(self, u: f64, y: f64) -> (f64, f64) {
        match self {
            Self::Logistic => {
                let p = clamp_prob(sigmoid(u));
                let q = p * (1.0 - p);
                (u + (y - p) / q, q)
            }
            Self::Probit => {
                let p = clamp_prob(normal_cdf(u));
                let d = normal_pdf(u).max(PROB_FLOOR);
                let b2 = p * (1.0 - p);
                (u + (y - p) / d, d * d / b2)
            }
        }
    }
}

/// Sensitivity (`ξ`, through `φ`) or specificity (`ψ`, through `η`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reliability {
    Sensitivity,
    Specificity,
}

/// Observed labels and covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionDataset {
    /// `Y`, indexed `[rater][voxel]`.
    pub labels: Vec<Vec<bool>>,
    pub target_intensity: Vec<f64>,
    /// Indexed `[rater][voxel]`.
    pub rater_intensity: Vec<Vec<f64>>,
    /// `C`, `V × J`, first column the intercept.
    pub design: Matrix,
    /// `X_r`, `V × ℓ` per rater (ℓ may be zero).
    pub sens_design: Vec<Matrix>,
    /// `Z_r`, `V × k` per rater.
    pub spec_design: Vec<Matrix>,
}

impl FusionDataset {
    /// Dataset with pure spatial reliability processes (`X_r = Z_r = 0`).
    pub fn new(
        labels: Vec<Vec<bool>>,
        target_intensity: Vec<f64>,
        rater_intensity: Vec<Vec<f64>>,
        design: Matrix,
    ) -> Result<Self> {
        let n_voxels = design.rows();
        let r = labels.len();
        let data = Self {
            labels,
            target_intensity,
            rater_intensity,
            design,
            sens_design: vec![Matrix::zeros(n_voxels, 0); r],
            spec_design: vec![Matrix::zeros(n_voxels, 0); r],
        };
        data.validate()?;
        Ok(data)
    }

    pub fn with_reliability_covariates(mut self, sens: Vec<Matrix>, spec: Vec<Matrix>) -> Result<Self> {
        self.sens_design = sens;
        self.spec_design = spec;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.design.rows();
        let r = self.labels.len();
        if r == 0 {
            return invalid("at least one rater is required");
        }
        if self.labels.iter().any(|l| l.len() != v) {
            return invalid("label vectors must have one entry per voxel");
        }
        if self.target_intensity.len() != v {
            return invalid("target intensity must have one entry per voxel");
        }
        if self.rater_intensity.len() != r || self.rater_intensity.iter().any(|i| i.len() != v) {
            return invalid("rater intensity must be V values for each rater");
        }
        if self.design.cols() >= 1 && (0..v).any(|i| self.design[(i, 0)] != 1.0) {
            return invalid("first design column must be an intercept of ones");
        }
        for (name, mats) in [("sensitivity", &self.sens_design), ("specificity", &self.spec_design)] {
            if mats.len() != r || mats.iter().any(|m| m.rows() != v) {
                return invalid(alloc::format!("{name} covariates must be V rows for each rater"));
            }
            if mats.windows(2).any(|w| w[0].cols() != w[1].cols()) {
                return invalid(alloc::format!("{name} covariates must have the same width for every rater"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n_voxels(&self) -> usize {
        self.design.rows()
    }

    #[inline]
    pub fn n_raters(&self) -> usize {
        self.labels.len()
    }

    /// `J`.
    #[inline]
    pub fn n_covariates(&self) -> usize {
        self.design.cols()
    }

    /// `ℓ`.
    pub fn n_sens_covariates(&self) -> usize {
        self.sens_design.first().map_or(0, Matrix::cols)
    }

    /// `k`.
    pub fn n_spec_covariates(&self) -> usize {
        self.spec_design.first().map_or(0, Matrix::cols)
    }
}

/// Prior on the true-status coefficients `δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorDelta {
    /// `N(0, Σ_δ)`.
    Gaussian(Matrix),
    /// Conditional mean prior.
    Cmp(CmpSpec),
}

impl PriorDelta {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian(m) => m.rows(),
            Self::Cmp(spec) => spec.dim(),
        }
    }
}

/// Hyperparameters. Construction validates `|ρ| < 1`, positive Gamma
/// parameters and positive-definite covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperConfig {
    rho_phi: f64,
    rho_eta: f64,
    a_phi: f64,
    b_phi: f64,
    a_eta: f64,
    b_eta: f64,
    prior_delta: PriorDelta,
    /// Cached `Σ_δ⁻¹` for the Gaussian case.
    delta_precision: Option<Matrix>,
    sigma_beta: Matrix,
    sigma_gamma: Matrix,
    link: LinkFunction,
}

/// Default prior variance for `δ` under the Gaussian option.
pub const DEFAULT_DELTA_VARIANCE: f64 = 4.0;
pub const DEFAULT_RHO: f64 = 0.95;

impl HyperConfig {
    /// Defaults: `ρ = 0.95`, `Ga(1, 2)` precisions, `Σ_δ = 4I`, `Σ_β = Σ_γ = I`,
    /// logistic link.
    pub fn new(n_covariates: usize, n_sens: usize, n_spec: usize) -> Self {
        let sd = Matrix::scaled_identity(n_covariates, DEFAULT_DELTA_VARIANCE);
        Self {
            rho_phi: DEFAULT_RHO,
            rho_eta: DEFAULT_RHO,
            a_phi: 1.0,
            b_phi: 2.0,
            a_eta: 1.0,
            b_eta: 2.0,
            delta_precision: Some(Matrix::scaled_identity(n_covariates, 1.0 / DEFAULT_DELTA_VARIANCE)),
            prior_delta: PriorDelta::Gaussian(sd),
            sigma_beta: Matrix::identity(n_sens),
            sigma_gamma: Matrix::identity(n_spec),
            link: LinkFunction::Logistic,
        }
    }

    /// Defaults sized from a dataset.
    pub fn for_dataset(data: &FusionDataset) -> Self {
        Self::new(data.n_covariates(), data.n_sens_covariates(), data.n_spec_covariates())
    }

    pub fn with_rho(mut self, rho_phi: f64, rho_eta: f64) -> Result<Self> {
        for (name, rho) in [("rho_phi", rho_phi), ("rho_eta", rho_eta)] {
            if !(rho.abs() < 1.0) {
                return invalid(alloc::format!("{name} must lie in (-1, 1), got {rho}"));
            }
        }
        self.rho_phi = rho_phi;
        self.rho_eta = rho_eta;
        Ok(self)
    }

    pub fn with_tau_hyper(mut self, a_phi: f64, b_phi: f64, a_eta: f64, b_eta: f64) -> Result<Self> {
        if [a_phi, b_phi, a_eta, b_eta].iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return invalid("Gamma shapes and rates must be positive and finite");
        }
        self.a_phi = a_phi;
        self.b_phi = b_phi;
        self.a_eta = a_eta;
        self.b_eta = b_eta;
        Ok(self)
    }

    pub fn with_delta_prior(mut self, prior: PriorDelta) -> Result<Self> {
        match &prior {
            PriorDelta::Gaussian(cov) => {
                let chol = Cholesky::new(cov, "Sigma_delta")?;
                if !cov.is_symmetric(1e-12) {
                    return invalid("Sigma_delta must be symmetric");
                }
                self.delta_precision = Some(chol.inverse());
            }
            PriorDelta::Cmp(spec) => {
                spec.validate()?;
                self.delta_precision = None;
            }
        }
        self.prior_delta = prior;
        Ok(self)
    }

    pub fn with_beta_prior(mut self, sigma_beta: Matrix) -> Result<Self> {
        check_spd(&sigma_beta, "Sigma_beta")?;
        self.sigma_beta = sigma_beta;
        Ok(self)
    }

    pub fn with_gamma_prior(mut self, sigma_gamma: Matrix) -> Result<Self> {
        check_spd(&sigma_gamma, "Sigma_gamma")?;
        self.sigma_gamma = sigma_gamma;
        Ok(self)
    }

    pub fn with_link(mut self, link: LinkFunction) -> Self {
        self.link = link;
        self
    }

    pub fn rho(&self, which: Reliability) -> f64 {
        match which {
            Reliability::Sensitivity => self.rho_phi,
            Reliability::Specificity => self.rho_eta,
        }
    }

    /// `(a, b)` of the Gamma prior on the field precision.
    pub fn tau_hyper(&self, which: Reliability) -> (f64, f64) {
        match which {
            Reliability::Sensitivity => (self.a_phi, self.b_phi),
            Reliability::Specificity => (self.a_eta, self.b_eta),
        }
    }

    pub fn prior_delta(&self) -> &PriorDelta {
        &self.prior_delta
    }

    pub(crate) fn delta_precision(&self) -> Option<&Matrix> {
        self.delta_precision.as_ref()
    }

    pub fn coefficient_prior(&self, which: Reliability) -> &Matrix {
        match which {
            Reliability::Sensitivity => &self.sigma_beta,
            Reliability::Specificity => &self.sigma_gamma,
        }
    }

    pub fn link(&self) -> LinkFunction {
        self.link
    }

    /// Checks dimensions against a dataset.
    pub fn check_dataset(&self, data: &FusionDataset) -> Result<()> {
        if self.prior_delta.dim() != data.n_covariates() {
            return invalid(alloc::format!(
                "delta prior has dimension {}, design has {} columns",
                self.prior_delta.dim(),
                data.n_covariates()
            ));
        }
        if self.sigma_beta.rows() != data.n_sens_covariates() || self.sigma_gamma.rows() != data.n_spec_covariates() {
            return invalid("coefficient prior dimensions do not match reliability covariates");
        }
        Ok(())
    }

    /// Log prior density of `δ` up to a constant.
    pub fn delta_log_prior(&self, delta: &[f64]) -> f64 {
        match &self.prior_delta {
            PriorDelta::Gaussian(_) => {
                let prec = self.delta_precision.as_ref().expect("gaussian prior caches its precision");
                -0.5 * dot(delta, &prec.mul_vec(delta))
            }
            PriorDelta::Cmp(spec) => cmp_log_prior(delta, spec, self.link),
        }
    }
}

fn check_spd(m: &Matrix, what: &'static str) -> Result<()> {
    if m.rows() == 0 {
        return Ok(());
    }
    if !m.is_symmetric(1e-12) {
        return invalid(alloc::format!("{what} must be symmetric"));
    }
    Cholesky::new(m, what).map(|_| ())
}

/// Sensitivity and specificity implied by the starting fields. Starting at
/// 1/2 would make the first label update ignore the raters entirely.
pub const INITIAL_RELIABILITY: f64 = 0.9;

/// Every latent quantity at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// Latent true labels `T`.
    pub t: Vec<bool>,
    /// `φ_r`, indexed `[rater][voxel]`.
    pub phi: Vec<Vec<f64>>,
    /// `η_r`.
    pub eta: Vec<Vec<f64>>,
    /// `ζ¹`.
    pub zeta1: Vec<Vec<f64>>,
    /// `ζ⁰`.
    pub zeta0: Vec<Vec<f64>>,
    pub delta: Vec<f64>,
    /// `β_r`, indexed `[rater][coef]`.
    pub beta: Vec<Vec<f64>>,
    /// `γ_r`.
    pub gamma: Vec<Vec<f64>>,
    pub tau_phi: Vec<f64>,
    pub tau_eta: Vec<f64>,
}

/// `0` under the Gaussian prior, the CMP prior center otherwise.
fn initial_delta(hyper: &HyperConfig) -> Option<Vec<f64>> {
    match hyper.prior_delta() {
        PriorDelta::Gaussian(_) => None,
        PriorDelta::Cmp(spec) => spec.prior_center(hyper.link()).ok(),
    }
}

impl ModelState {
    /// Starting point: `T` from strict majority vote, constant fields giving
    /// every rater reliability [`INITIAL_RELIABILITY`], zero coefficients,
    /// precisions at their prior means, and latent `ζ` values of
    /// ±0.5 consistent with the labels.
    pub fn initial(data: &FusionDataset, hyper: &HyperConfig) -> Self {
        let v = data.n_voxels();
        let r = data.n_raters();
        let t = crate::metrics::majority_vote(&data.labels);
        let initial_field = normal_quantile(INITIAL_RELIABILITY);
        let zeta1 = data.labels.iter().map(|l| l.iter().map(|&y| if y { 0.5 } else { -0.5 }).collect()).collect();
        let zeta0 = data.labels.iter().map(|l| l.iter().map(|&y| if y { -0.5 } else { 0.5 }).collect()).collect();
        let (a_phi, b_phi) = hyper.tau_hyper(Reliability::Sensitivity);
        let (a_eta, b_eta) = hyper.tau_hyper(Reliability::Specificity);
        Self {
            t,
            phi: vec![vec![initial_field; v]; r],
            eta: vec![vec![initial_field; v]; r],
            zeta1,
            zeta0,
            delta: initial_delta(hyper).unwrap_or_else(|| vec![0.0; data.n_covariates()]),
            beta: vec![vec![0.0; data.n_sens_covariates()]; r],
            gamma: vec![vec![0.0; data.n_spec_covariates()]; r],
            tau_phi: vec![a_phi / b_phi; r],
            tau_eta: vec![a_eta / b_eta; r],
        }
    }

    pub fn n_raters(&self) -> usize {
        self.phi.len()
    }

    /// Probit argument `x_vrᵀβ_r + φ_vr` or `z_vrᵀγ_r + η_vr`.
    #[inline]
    pub fn reliability_predictor(&self, data: &FusionDataset, which: Reliability, v: usize, r: usize) -> f64 {
        match which {
            Reliability::Sensitivity => offset(&data.sens_design[r], &self.beta[r], v) + self.phi[r][v],
            Reliability::Specificity => offset(&data.spec_design[r], &self.gamma[r], v) + self.eta[r][v],
        }
    }

    /// `c_vᵀδ`.
    #[inline]
    pub fn true_status_predictor(&self, data: &FusionDataset, v: usize) -> f64 {
        dot(data.design.row(v), &self.delta)
    }

    /// Augmented variables agree in sign with the labels for the active
    /// branch (`ζ¹` where `T = 1`, `ζ⁰` where `T = 0`).
    pub fn sign_consistent(&self, data: &FusionDataset) -> bool {
        (0..self.n_raters()).all(|r| {
            (0..data.n_voxels()).all(|v| {
                let y = data.labels[r][v];
                if self.t[v] {
                    (self.zeta1[r][v] >= 0.0) == y
                } else {
                    (self.zeta0[r][v] < 0.0) == y
                }
            })
        })
    }
}

/// `x_vᵀβ` for row `v` of a (possibly zero-width) design.
#[inline]
pub(crate) fn offset(design: &Matrix, coef: &[f64], v: usize) -> f64 {
    if design.cols() == 0 {
        0.0
    } else {
        dot(design.row(v), coef)
    }
}

/// `ξ(v, r) = Φ(xᵀβ + φ)` or `ψ(v, r) = Φ(zᵀγ + η)`.
pub fn reliability(v: usize, r: usize, state: &ModelState, data: &FusionDataset, which: Reliability) -> f64 {
    normal_cdf(state.reliability_predictor(data, which, v, r))
}

/// `p*(v, r) = ξ^{T_v} (1 − ψ)^{1 − T_v}`, the probability that rater `r`
/// labels voxel `v` as foreground.
pub fn bernoulli_prob(v: usize, r: usize, state: &ModelState, data: &FusionDataset) -> f64 {
    if state.t[v] {
        reliability(v, r, state, data, Reliability::Sensitivity)
    } else {
        normal_sf(state.reliability_predictor(data, Reliability::Specificity, v, r))
    }
}

/// `ln Φ(x)` clamped to the probability guard band.
#[inline]
pub(crate) fn ln_phi_clamped(x: f64) -> f64 {
    ln_normal_cdf(x).clamp(LN_PROB_FLOOR, LN_PROB_CEIL)
}

pub(crate) const LN_PROB_FLOOR: f64 = -690.775_527_898_213_7;
pub(crate) const LN_PROB_CEIL: f64 = -1.110_223_024_625_156_5e-16;

/// Log-likelihood contribution of one label given `T_v`.
#[inline]
pub(crate) fn label_log_lik(y: bool, t: bool, sens_pred: f64, spec_pred: f64) -> f64 {
    match (t, y) {
        (true, true) => ln_phi_clamped(sens_pred),
        (true, false) => ln_phi_clamped(-sens_pred),
        (false, false) => ln_phi_clamped(spec_pred),
        (false, true) => ln_phi_clamped(-spec_pred),
    }
}

/// Log joint density split by component (each up to an additive constant
/// that does not involve the parameters).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogJoint {
    pub likelihood: f64,
    pub true_status: f64,
    pub delta_prior: f64,
    pub car_phi: f64,
    pub car_eta: f64,
    pub beta_prior: f64,
    pub gamma_prior: f64,
    pub tau_prior: f64,
}

impl LogJoint {
    pub fn total(&self) -> f64 {
        self.likelihood
            + self.true_status
            + self.delta_prior
            + self.car_phi
            + self.car_eta
            + self.beta_prior
            + self.gamma_prior
            + self.tau_prior
    }
}

/// Component-wise log joint density.
pub fn log_joint_components(
    state: &ModelState,
    data: &FusionDataset,
    hyper: &HyperConfig,
    graph: &LatticeGraph,
) -> Result<LogJoint> {
    let n = data.n_voxels();
    let link = hyper.link();
    let mut out = LogJoint::default();

    for r in 0..data.n_raters() {
        for v in 0..n {
            let sens = state.reliability_predictor(data, Reliability::Sensitivity, v, r);
            let spec = state.reliability_predictor(data, Reliability::Specificity, v, r);
            out.likelihood += label_log_lik(data.labels[r][v], state.t[v], sens, spec);
        }
    }
    check_finite(out.likelihood, "likelihood")?;

    for v in 0..n {
        let u = state.true_status_predictor(data, v);
        out.true_status += if state.t[v] {
            link.ln_inverse(u).max(LN_PROB_FLOOR)
        } else {
            link.ln_inverse_complement(u).max(LN_PROB_FLOOR)
        };
    }
    check_finite(out.true_status, "true-status regression")?;

    out.delta_prior = hyper.delta_log_prior(&state.delta);
    check_finite(out.delta_prior, "delta prior")?;

    let half_v = 0.5 * n as f64;
    for r in 0..data.n_raters() {
        let q_phi = graph.car_quadratic_form(&state.phi[r], hyper.rho(Reliability::Sensitivity));
        let q_eta = graph.car_quadratic_form(&state.eta[r], hyper.rho(Reliability::Specificity));
        out.car_phi += half_v * log(state.tau_phi[r]) - 0.5 * state.tau_phi[r] * q_phi;
        out.car_eta += half_v * log(state.tau_eta[r]) - 0.5 * state.tau_eta[r] * q_eta;

        out.beta_prior += gaussian_log_kernel(hyper.coefficient_prior(Reliability::Sensitivity), &state.beta[r])?;
        out.gamma_prior += gaussian_log_kernel(hyper.coefficient_prior(Reliability::Specificity), &state.gamma[r])?;

        let (a_phi, b_phi) = hyper.tau_hyper(Reliability::Sensitivity);
        let (a_eta, b_eta) = hyper.tau_hyper(Reliability::Specificity);
        out.tau_prior += (a_phi - 1.0) * log(state.tau_phi[r]) - b_phi * state.tau_phi[r];
        out.tau_prior += (a_eta - 1.0) * log(state.tau_eta[r]) - b_eta * state.tau_eta[r];
    }
    check_finite(out.car_phi, "CAR prior on phi")?;
    check_finite(out.car_eta, "CAR prior on eta")?;
    check_finite(out.beta_prior, "beta prior")?;
    check_finite(out.gamma_prior, "gamma prior")?;
    check_finite(out.tau_prior, "precision priors")?;
    Ok(out)
}

/// Unnormalised joint log posterior density.
pub fn log_joint(state: &ModelState, data: &FusionDataset, hyper: &HyperConfig, graph: &LatticeGraph) -> Result<f64> {
    let c = log_joint_components(state, data, hyper, graph)?;
    let total = c.total();
    check_finite(total, "joint density")?;
    Ok(total)
}

fn gaussian_log_kernel(cov: &Matrix, x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Ok(0.0);
    }
    let chol = Cholesky::new(cov, "coefficient prior covariance")?;
    Ok(-0.5 * chol.inv_quad_form(x))
}

fn check_finite(x: f64, component: &'static str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericalOverflow { component })
    }
}

/// Probability helpers used by samplers: `ln` of the clamped inverse link.
#[inline]
pub(crate) fn ln_prior_odds_parts(link: LinkFunction, u: f64) -> (f64, f64) {
    (
        link.ln_inverse(u).clamp(LN_PROB_FLOOR, LN_PROB_CEIL),
        link.ln_inverse_complement(u).clamp(LN_PROB_FLOOR, LN_PROB_CEIL),
    )
}
