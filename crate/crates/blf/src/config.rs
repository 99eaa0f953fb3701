//! `model.json`: priors, link and covariate options for `fuse`.
//!
//! Every field is optional. An empty object gives the logistic link,
//! ρ = 0.95, Gamma(1, 2) precisions and the four-scenario conditional mean
//! prior on δ.

use blf_core::covariates::CovariateOptions;
use blf_core::model::DEFAULT_RHO;
use blf_core::priors::{
    default_cmp_scenarios_with_shapes, elicit_tau_hyper, CmpSpec, CovariateSummary, DEFAULT_SCENARIO_SHAPES,
};
use blf_core::{FusionDataset, HyperConfig, LinkFunction, Matrix, PriorDelta};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum TauPrior {
    /// Elicited from a prior guess of the precision.
    Target { tau: f64 },
    /// Explicit `Gamma(shape, rate)`.
    Gamma { shape: f64, rate: f64 },
}

impl Default for TauPrior {
    fn default() -> Self {
        TauPrior::Target { tau: 0.5 }
    }
}

impl TauPrior {
    pub fn shape_rate(&self) -> CliResult<(f64, f64)> {
        match *self {
            TauPrior::Target { tau } => Ok(elicit_tau_hyper(tau)?),
            TauPrior::Gamma { shape, rate } => Ok((shape, rate)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum DeltaPriorConfig {
    /// `N(0, variance · I)`.
    Gaussian { variance: f64 },
    /// Conditional mean prior at four covariate scenarios placed from the
    /// data's quantiles. Needs the interaction design (J = 4).
    Scenarios {
        #[serde(default = "default_shapes")]
        shapes: [(f64, f64); 4],
    },
    /// Conditional mean prior with explicit pseudo-covariate rows.
    Cmp { pseudo_design: Vec<Vec<f64>>, beta_shapes: Vec<(f64, f64)> },
}

fn default_shapes() -> [(f64, f64); 4] {
    DEFAULT_SCENARIO_SHAPES
}

impl Default for DeltaPriorConfig {
    fn default() -> Self {
        DeltaPriorConfig::Scenarios { shapes: DEFAULT_SCENARIO_SHAPES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub link: LinkFunction,
    pub rho_phi: f64,
    pub rho_eta: f64,
    pub tau_phi: TauPrior,
    pub tau_eta: TauPrior,
    pub delta_prior: DeltaPriorConfig,
    pub covariates: CovariateOptions,
    /// Probability threshold for the point segmentation.
    pub threshold: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            link: LinkFunction::default(),
            rho_phi: DEFAULT_RHO,
            rho_eta: DEFAULT_RHO,
            tau_phi: TauPrior::default(),
            tau_eta: TauPrior::default(),
            delta_prior: DeltaPriorConfig::default(),
            covariates: CovariateOptions::default(),
            threshold: 0.5,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(CliError::Invalid(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        Ok(())
    }

    /// Hyperparameters for `data`, whose design was built with `self.covariates`.
    pub fn hyper(&self, data: &FusionDataset) -> CliResult<HyperConfig> {
        self.validate()?;
        let (a_phi, b_phi) = self.tau_phi.shape_rate()?;
        let (a_eta, b_eta) = self.tau_eta.shape_rate()?;
        let j = data.n_covariates();
        let prior = match &self.delta_prior {
            DeltaPriorConfig::Gaussian { variance } => PriorDelta::Gaussian(Matrix::scaled_identity(j, *variance)),
            DeltaPriorConfig::Scenarios { shapes } => {
                if j != 4 {
                    return Err(CliError::Invalid(format!(
                        "the scenario prior needs the 4-column interaction design, but the design has {j} columns"
                    )));
                }
                let summary = CovariateSummary::from_covariates(&data.design.column(1), &data.design.column(2))?;
                PriorDelta::Cmp(default_cmp_scenarios_with_shapes(&summary, *shapes)?)
            }
            DeltaPriorConfig::Cmp { pseudo_design, beta_shapes } => {
                PriorDelta::Cmp(CmpSpec::new(Matrix::from_rows(pseudo_design)?, beta_shapes.clone())?)
            }
        };
        Ok(HyperConfig::for_dataset(data)
            .with_link(self.link)
            .with_rho(self.rho_phi, self.rho_eta)?
            .with_tau_hyper(a_phi, b_phi, a_eta, b_eta)?
            .with_delta_prior(prior)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        let c: ModelConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, ModelConfig::default());
        assert_eq!(c.tau_phi.shape_rate().unwrap(), (1.0, 2.0));
    }

    #[test]
    fn tagged_priors_parse() {
        let c: ModelConfig = serde_json::from_str(
            r#"{"link":"probit","delta_prior":{"kind":"gaussian","variance":2.0},"tau_eta":{"kind":"gamma","shape":2.0,"rate":3.0}}"#,
        )
        .unwrap();
        assert_eq!(c.link, LinkFunction::Probit);
        assert_eq!(c.delta_prior, DeltaPriorConfig::Gaussian { variance: 2.0 });
        assert_eq!(c.tau_eta.shape_rate().unwrap(), (2.0, 3.0));
        assert!(serde_json::from_str::<ModelConfig>(r#"{"rho":0.5}"#).is_err());
    }
}
