//! Hyperparameter elicitation for the field precisions and the conditional
//! mean prior (CMP) on the true-status coefficients.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{dot, Matrix};
use crate::model::LinkFunction;

/// Gamma `(shape, rate)` with shape 1 and mean `tau_target`.
pub fn elicit_tau_hyper(tau_target: f64) -> Result<(f64, f64)> {
    if !(tau_target > 0.0) || !tau_target.is_finite() {
        return invalid(alloc::format!("tau target must be positive, got {tau_target}"));
    }
    Ok((1.0, 1.0 / tau_target))
}

/// Pseudo-observations defining a conditional mean prior: one covariate
/// vector `c̃_j` per row and a Beta prior on `g⁻¹(c̃_jᵀδ)` for each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmpSpec {
    /// `J × J`, must be nonsingular.
    pub pseudo_design: Matrix,
    /// `(ã_j, b̃_j)` per row.
    pub beta_shapes: Vec<(f64, f64)>,
}

/// Pseudo designs with a condition estimate above this are rejected.
const MAX_CONDITION: f64 = 1e12;

impl CmpSpec {
    pub fn new(pseudo_design: Matrix, beta_shapes: Vec<(f64, f64)>) -> Result<Self> {
        let spec = Self { pseudo_design, beta_shapes };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.pseudo_design.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.pseudo_design.rows();
        if j == 0 || self.pseudo_design.cols() != j {
            return invalid("CMP pseudo design must be square and non-empty");
        }
        if self.beta_shapes.len() != j {
            return invalid("CMP needs one pair of Beta shapes per pseudo observation");
        }
        if self.beta_shapes.iter().any(|&(a, b)| !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite()) {
            return invalid("CMP Beta shapes must be positive");
        }
        let cond = condition_estimate(&self.pseudo_design);
        if !(cond < MAX_CONDITION) {
            return invalid(alloc::format!(
                "CMP pseudo design is singular or ill-conditioned (condition ~{cond:e}); adjust the pseudo covariates"
            ));
        }
        Ok(())
    }

    /// Prior mean of each pseudo probability, `ã / (ã + b̃)`.
    pub fn prior_means(&self) -> Vec<f64> {
        self.beta_shapes.iter().map(|&(a, b)| a / (a + b)).collect()
    }

    /// The `δ` at which every pseudo probability equals its prior mean:
    /// solves `C̃ δ = g(ã / (ã + b̃))`.
    pub fn prior_center(&self, link: LinkFunction) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = self.prior_means().into_iter().map(|p| link.link(p)).collect();
        match self.pseudo_design.solve(&rhs) {
            Some(d) => Ok(d),
            None => invalid("CMP pseudo design is singular"),
        }
    }
}

/// 1-norm condition number via an explicit inverse (J is tiny).
fn condition_estimate(m: &Matrix) -> f64 {
    let n = m.rows();
    let det = m.determinant();
    if det == 0.0 || !det.is_finite() {
        return f64::INFINITY;
    }
    let mut inv = Matrix::zeros(n, n);
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let Some(x) = m.solve(&e) else { return f64::INFINITY };
        for (i, xi) in x.into_iter().enumerate() {
            inv[(i, col)] = xi;
        }
    }
    norm1(m) * norm1(&inv)
}

fn norm1(m: &Matrix) -> f64 {
    (0..m.cols()).map(|j| (0..m.rows()).map(|i| m[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Unnormalised log density of the CMP-induced prior:
/// `Σ_j (ã_j − 1) ln p̃_j + (b̃_j − 1) ln(1 − p̃_j) + ln ġ⁻¹(c̃_jᵀδ)` with
/// `p̃_j = g⁻¹(c̃_jᵀδ)`.
pub fn cmp_log_prior(delta: &[f64], spec: &CmpSpec, link: LinkFunction) -> f64 {
    spec.beta_shapes
        .iter()
        .enumerate()
        .map(|(j, &(a, b))| {
            let u = dot(spec.pseudo_design.row(j), delta);
            (a - 1.0) * link.ln_inverse(u) + (b - 1.0) * link.ln_inverse_complement(u) + link.ln_inverse_deriv(u)
        })
        .sum()
}

/// Gradient of [`cmp_log_prior`] with respect to `δ`.
pub fn cmp_log_prior_grad(delta: &[f64], spec: &CmpSpec, link: LinkFunction) -> Vec<f64> {
    let mut grad = vec![0.0; delta.len()];
    for (j, &(a, b)) in spec.beta_shapes.iter().enumerate() {
        let row = spec.pseudo_design.row(j);
        let u = dot(row, delta);
        let d =
            (a - 1.0) * link.d_ln_inverse(u) + (b - 1.0) * link.d_ln_inverse_complement(u) + link.d_ln_inverse_deriv(u);
        for (g, c) in grad.iter_mut().zip(row) {
            *g += d * c;
        }
    }
    grad
}

/// Empirical quantiles of the two covariates used to place pseudo points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateSummary {
    pub distance_q05: f64,
    pub distance_q50: f64,
    pub distance_q95: f64,
    pub intensity_q05: f64,
    pub intensity_q50: f64,
    pub intensity_q95: f64,
}

impl CovariateSummary {
    pub fn from_covariates(distance: &[f64], intensity: &[f64]) -> Result<Self> {
        if distance.is_empty() || intensity.is_empty() {
            return invalid("covariate summary needs non-empty covariates");
        }
        let qd = |p| crate::summaries::quantile_unsorted(distance, p);
        let qi = |p| crate::summaries::quantile_unsorted(intensity, p);
        Ok(Self {
            distance_q05: qd(0.05),
            distance_q50: qd(0.5),
            distance_q95: qd(0.95),
            intensity_q05: qi(0.05),
            intensity_q50: qi(0.5),
            intensity_q95: qi(0.95),
        })
    }
}

/// Beta shapes for the four default scenarios: small distance with high
/// intensity (very likely inside), large distance with low intensity (very
/// unlikely), mid distance with average intensity (borderline) and large
/// distance with high intensity (not very likely).
pub const DEFAULT_SCENARIO_SHAPES: [(f64, f64); 4] = [(20.0, 1.0), (1.0, 20.0), (1.0, 1.0), (1.0, 4.0)];

/// Four-scenario CMP for the design `[1, distance, intensity, distance·intensity]`.
pub fn default_cmp_scenarios(summary: &CovariateSummary) -> Result<CmpSpec> {
    default_cmp_scenarios_with_shapes(summary, DEFAULT_SCENARIO_SHAPES)
}

pub fn default_cmp_scenarios_with_shapes(summary: &CovariateSummary, shapes: [(f64, f64); 4]) -> Result<CmpSpec> {
    let points = [
        (summary.distance_q05, summary.intensity_q95),
        (summary.distance_q95, summary.intensity_q05),
        (summary.distance_q50, summary.intensity_q50),
        (summary.distance_q95, summary.intensity_q95),
    ];
    let rows: Vec<Vec<f64>> = points.iter().map(|&(d, i)| vec![1.0, d, i, d * i]).collect();
    let design = Matrix::from_rows(&rows)?;
    CmpSpec::new(design, shapes.to_vec()).map_err(|e| match e {
        crate::Error::InvalidArgument(msg) => crate::Error::InvalidArgument(alloc::format!(
            "{msg}; the covariate quantiles coincide, so spread the distance or intensity covariate"
        )),
        other => other,
    })
}
