//! Bayesian spatial label fusion.
//!
//! Combines several corrupted binary segmentations of one 2-D image lattice
//! into a posterior probability map for the true structure. Each rater gets
//! spatially varying sensitivity and specificity fields (probit links on
//! proper CAR Gaussian Markov random fields), the true labels follow a
//! covariate regression, and the posterior is explored with a
//! Metropolis-Hastings-within-Gibbs sampler that updates the spatial fields
//! chromatically.
//!
//! The crate is `no_std` (it needs `alloc`). The `std` feature is on by
//! default; `parallel` adds a rayon worker pool for the chromatic field
//! updates. Results are bitwise identical with or without it.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod covariates;
pub mod diagnostics;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod model;
pub mod priors;
pub mod rng;
pub mod samplers;
pub mod simgen;
pub mod summaries;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use lattice::{Coloring, LatticeGraph};
pub use linalg::Matrix;
pub use model::{FusionDataset, HyperConfig, LinkFunction, ModelState, PriorDelta};
pub use samplers::{ChainOutput, Sampler, SamplerConfig};
