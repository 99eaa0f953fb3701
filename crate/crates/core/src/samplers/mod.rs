//! MCMC kernels and the Gibbs sweep.
//!
//! Sweep order: `T` (with `ζ` marginalised), `ζ`, then per rater the `φ`
//! and `η` fields, then per rater their precisions, optionally `β` and `γ`,
//! and finally `δ`.

mod delta;
mod kernels;
mod truncnorm;
pub mod validation;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{Coloring, LatticeGraph};
use crate::model::{FusionDataset, HyperConfig, ModelState, Reliability};

pub use delta::{delta_log_target, gamerman_proposal, log_acceptance_ratio, update_delta_gamerman, GamermanProposal};
pub use kernels::{
    coefficient_conditional, regenerate_labels, spatial_conditional, tau_conditional, true_status_log_odds,
    true_status_prob, true_status_probs, update_coefficients, update_spatial_field, update_t, update_tau, update_zeta,
};
pub use truncnorm::sample_truncated_normal;

/// Which kernels run in a sweep. Disabled kernels leave their block frozen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelMask {
    pub true_labels: bool,
    pub zeta: bool,
    pub phi: bool,
    pub eta: bool,
    pub tau: bool,
    pub delta: bool,
}

impl Default for KernelMask {
    fn default() -> Self {
        Self { true_labels: true, zeta: true, phi: true, eta: true, tau: true, delta: true }
    }
}

impl KernelMask {
    /// Only `T` (and `ζ`) move; everything else is held at its current value.
    pub fn labels_only() -> Self {
        Self { true_labels: true, zeta: true, phi: false, eta: false, tau: false, delta: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub rng_seed: u64,
    pub n_workers: usize,
    /// Sample `β_r` and `γ_r` (no effect when the reliability designs are empty).
    pub update_beta_gamma: bool,
    pub kernels: KernelMask,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_iterations: 100_000,
            burn_in: 50_000,
            thin: 25,
            rng_seed: 0,
            n_workers: 1,
            update_beta_gamma: false,
            kernels: KernelMask::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return invalid("n_iterations must be positive");
        }
        if self.burn_in >= self.n_iterations {
            return invalid(alloc::format!(
                "burn_in ({}) must be smaller than n_iterations ({})",
                self.burn_in,
                self.n_iterations
            ));
        }
        if self.thin == 0 {
            return invalid("thin must be at least 1");
        }
        if self.n_workers == 0 {
            return invalid("n_workers must be at least 1");
        }
        Ok(())
    }

    /// Number of stored iterates: iterations `i > burn_in` with
    /// `(i − burn_in) mod thin = 0`.
    pub fn n_retained(&self) -> usize {
        (self.n_iterations - self.burn_in) / self.thin
    }

    pub fn is_retained(&self, iteration: usize) -> bool {
        iteration > self.burn_in && (iteration - self.burn_in).is_multiple_of(self.thin)
    }
}

/// Executes the per-voxel draws of one colour class, either inline or on a
/// rayon pool. Each draw owns its random stream, so the result does not
/// depend on the executor.
pub struct WorkerPool {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl WorkerPool {
    pub fn sequential() -> Self {
        Self {
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// A pool with `n_workers` threads; one worker (or a build without the
    /// `parallel` feature) runs inline.
    pub fn new(n_workers: usize) -> Result<Self> {
        #[cfg(feature = "parallel")]
        {
            if n_workers > 1 {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n_workers)
                    .build()
                    .map_err(|e| crate::Error::Internal(alloc::format!("cannot start worker pool: {e}")))?;
                return Ok(Self { pool: Some(pool) });
            }
        }
        let _ = n_workers;
        Ok(Self::sequential())
    }

    pub(crate) fn map<F>(&self, items: &[usize], f: F) -> Result<Vec<f64>>
    where
        F: Fn(usize) -> Result<f64> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| items.par_iter().map(|&v| f(v)).collect());
        }
        items.iter().map(|&v| f(v)).collect()
    }
}

impl core::fmt::Debug for WorkerPool {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        #[cfg(feature = "parallel")]
        let threads = self.pool.as_ref().map_or(1, |p| p.current_num_threads());
        #[cfg(not(feature = "parallel"))]
        let threads = 1;
        f.debug_struct("WorkerPool").field("threads", &threads).finish()
    }
}

/// Everything a sweep reads but never changes.
#[derive(Debug, Clone, Copy)]
pub struct SweepContext<'a> {
    pub data: &'a FusionDataset,
    pub graph: &'a LatticeGraph,
    pub coloring: &'a Coloring,
    pub hyper: &'a HyperConfig,
}

/// One full sweep in the fixed order. `sweep` keys the random streams.
/// Returns whether the `δ` proposal was accepted (`false` when frozen).
pub fn gibbs_sweep(
    state: &mut ModelState,
    ctx: SweepContext<'_>,
    config: &SamplerConfig,
    sweep: u64,
    pool: &WorkerPool,
) -> Result<bool> {
    let SweepContext { data, graph, coloring, hyper } = ctx;
    let seed = config.rng_seed;
    let mask = config.kernels;
    if mask.true_labels {
        update_t(state, data, hyper, seed, sweep);
    }
    if mask.zeta {
        update_zeta(state, data, seed, sweep)?;
    }
    for r in 0..data.n_raters() {
        if mask.phi {
            update_spatial_field(Reliability::Sensitivity, r, state, data, graph, coloring, hyper, seed, sweep, pool)?;
        }
        if mask.eta {
            update_spatial_field(Reliability::Specificity, r, state, data, graph, coloring, hyper, seed, sweep, pool)?;
        }
    }
    if mask.tau {
        for r in 0..data.n_raters() {
            update_tau(Reliability::Sensitivity, r, state, graph, hyper, seed, sweep)?;
            update_tau(Reliability::Specificity, r, state, graph, hyper, seed, sweep)?;
        }
    }
    if config.update_beta_gamma {
        for r in 0..data.n_raters() {
            update_coefficients(Reliability::Sensitivity, r, state, data, hyper, seed, sweep)?;
            update_coefficients(Reliability::Specificity, r, state, data, hyper, seed, sweep)?;
        }
    }
    if mask.delta {
        return update_delta_gamerman(&mut state.delta, &state.t, data, hyper, seed, sweep);
    }
    Ok(false)
}

/// One stored iterate, borrowed from the running sampler.
#[derive(Debug, Clone, Copy)]
pub struct RetainedSample<'a> {
    pub iteration: usize,
    pub rb_prob: &'a [f64],
    pub volume: f64,
    pub delta: &'a [f64],
    pub tau_phi: &'a [f64],
    pub tau_eta: &'a [f64],
    pub accepted_delta: bool,
}

/// Receives retained iterates as they are produced.
pub trait SampleSink {
    fn record(&mut self, sample: &RetainedSample<'_>) -> Result<()>;
}

/// Retained draws held in memory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    /// `P(T_v = 1 | ω⁽ᵏ⁾, Y)` per retained iterate.
    pub rb_prob_samples: Vec<Vec<f64>>,
    /// `M⁽ᵏ⁾ = Σ_v P(T_v = 1 | ω⁽ᵏ⁾, Y)`.
    pub volume_samples: Vec<f64>,
    pub delta_samples: Vec<Vec<f64>>,
    pub tau_phi_samples: Vec<Vec<f64>>,
    pub tau_eta_samples: Vec<Vec<f64>>,
    pub accepted_delta: Vec<bool>,
    /// Sweep index of each retained iterate.
    pub iterations: Vec<usize>,
    /// Fraction of accepted `δ` proposals over the whole run.
    pub acceptance_rate_delta: f64,
}

impl ChainOutput {
    pub fn len(&self) -> usize {
        self.volume_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume_samples.is_empty()
    }
}

impl SampleSink for ChainOutput {
    fn record(&mut self, s: &RetainedSample<'_>) -> Result<()> {
        self.rb_prob_samples.push(s.rb_prob.to_vec());
        self.volume_samples.push(s.volume);
        self.delta_samples.push(s.delta.to_vec());
        self.tau_phi_samples.push(s.tau_phi.to_vec());
        self.tau_eta_samples.push(s.tau_eta.to_vec());
        self.accepted_delta.push(s.accepted_delta);
        self.iterations.push(s.iteration);
        Ok(())
    }
}

/// Summary returned by [`Sampler::run`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub iterations: usize,
    pub retained: usize,
    pub acceptance_rate_delta: f64,
}

/// A chain bound to its data.
#[derive(Debug)]
pub struct Sampler<'a> {
    data: &'a FusionDataset,
    graph: &'a LatticeGraph,
    hyper: &'a HyperConfig,
    coloring: Coloring,
    config: SamplerConfig,
    state: ModelState,
    sweep: u64,
    accepted: u64,
    attempted: u64,
    pool: WorkerPool,
}

impl<'a> Sampler<'a> {
    pub fn new(
        data: &'a FusionDataset,
        graph: &'a LatticeGraph,
        hyper: &'a HyperConfig,
        config: SamplerConfig,
    ) -> Result<Self> {
        config.validate()?;
        data.validate()?;
        hyper.check_dataset(data)?;
        if graph.len() != data.n_voxels() {
            return invalid(alloc::format!("lattice has {} voxels but the data has {}", graph.len(), data.n_voxels()));
        }
        let pool = WorkerPool::new(config.n_workers)?;
        Ok(Self {
            data,
            graph,
            hyper,
            coloring: Coloring::for_lattice(graph),
            state: ModelState::initial(data, hyper),
            config,
            sweep: 0,
            accepted: 0,
            attempted: 0,
            pool,
        })
    }

    /// Replaces the starting state (dimensions must match the data).
    pub fn with_state(mut self, state: ModelState) -> Result<Self> {
        let (v, r) = (self.data.n_voxels(), self.data.n_raters());
        let ok = state.t.len() == v
            && state.phi.len() == r
            && state.eta.len() == r
            && state.phi.iter().chain(&state.eta).chain(&state.zeta1).chain(&state.zeta0).all(|f| f.len() == v)
            && state.delta.len() == self.data.n_covariates()
            && state.tau_phi.len() == r
            && state.tau_eta.len() == r;
        if !ok {
            return invalid("initial state dimensions do not match the data");
        }
        self.state = state;
        Ok(self)
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut ModelState {
        &mut self.state
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Sweeps completed so far.
    pub fn sweeps(&self) -> u64 {
        self.sweep
    }

    pub fn acceptance_rate_delta(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempted as f64
        }
    }

    /// Runs one sweep; returns whether `δ` moved.
    pub fn sweep(&mut self) -> Result<bool> {
        self.sweep += 1;
        let ctx = SweepContext { data: self.data, graph: self.graph, coloring: &self.coloring, hyper: self.hyper };
        let accepted = gibbs_sweep(&mut self.state, ctx, &self.config, self.sweep, &self.pool)?;
        if self.config.kernels.delta {
            self.attempted += 1;
            self.accepted += u64::from(accepted);
        }
        Ok(accepted)
    }

    /// Sweep against a different dataset of the same shape (used when the
    /// labels are regenerated between sweeps).
    pub fn sweep_with_data(&mut self, data: &FusionDataset) -> Result<bool> {
        self.sweep += 1;
        let ctx = SweepContext { data, graph: self.graph, coloring: &self.coloring, hyper: self.hyper };
        let accepted = gibbs_sweep(&mut self.state, ctx, &self.config, self.sweep, &self.pool)?;
        if self.config.kernels.delta {
            self.attempted += 1;
            self.accepted += u64::from(accepted);
        }
        Ok(accepted)
    }

    /// Runs `n_iterations` sweeps, passing every retained iterate to `sink`.
    pub fn run<S: SampleSink + ?Sized>(&mut self, sink: &mut S) -> Result<RunSummary> {
        let mut retained = 0;
        for i in 1..=self.config.n_iterations {
            let accepted = self.sweep()?;
            if self.config.is_retained(i) {
                let rb = true_status_probs(&self.state, self.data, self.hyper);
                let volume = rb.iter().sum::<f64>();
                sink.record(&RetainedSample {
                    iteration: i,
                    rb_prob: &rb,
                    volume,
                    delta: &self.state.delta,
                    tau_phi: &self.state.tau_phi,
                    tau_eta: &self.state.tau_eta,
                    accepted_delta: accepted,
                })?;
                retained += 1;
            }
        }
        Ok(RunSummary {
            iterations: self.config.n_iterations,
            retained,
            acceptance_rate_delta: self.acceptance_rate_delta(),
        })
    }
}

/// Runs a chain from the default starting state and keeps every retained
/// iterate in memory.
pub fn run_chain(
    data: &FusionDataset,
    graph: &LatticeGraph,
    hyper: &HyperConfig,
    config: &SamplerConfig,
) -> Result<ChainOutput> {
    let mut sampler = Sampler::new(data, graph, hyper, config.clone())?;
    let mut out = ChainOutput::default();
    let summary = sampler.run(&mut out)?;
    out.acceptance_rate_delta = summary.acceptance_rate_delta;
    Ok(out)
}
