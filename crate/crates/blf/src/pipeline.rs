//! The `simulate`, `fuse` and `vote` pipelines, independent of argument
//! parsing.

use std::path::Path;

use blf_core::diagnostics::{chain_traces, diagnose, TraceDiagnostic};
use blf_core::metrics::{avd, dice, global_weights, local_weights, majority_vote, volume, weighted_vote, VoteWeights};
use blf_core::samplers::run_chain;
use blf_core::simgen::{generate_simulation, SimConfig};
use blf_core::summaries::{credible_interval, rb_probability_map, threshold_map, volume_distribution};
use blf_core::SamplerConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ModelConfig;
use crate::error::{CliError, CliResult};
use crate::instance::{export_instance, load_data_dir, DataDir};
use crate::io::{write_json, write_mask_csv, write_pgm16, write_table_csv, write_values_csv};

pub const VOLUME_CI_LEVEL: f64 = 0.95;

/// Dice, volume and absolute volume difference of one method. `dice` and
/// `avd` are `null` without a reference segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub dice: Option<f64>,
    pub volume: f64,
    pub avd: Option<f64>,
}

impl MethodReport {
    fn new(method: &str, volume_estimate: f64, seg: &[bool], truth: Option<&[bool]>) -> Self {
        let (d, a) = match truth {
            Some(t) => (dice(seg, t).ok(), avd(volume_estimate, volume(t)).ok()),
            None => (None, None),
        };
        Self { method: method.into(), dice: d, volume: volume_estimate, avd: a }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeSummary {
    pub mean: f64,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuseReport {
    pub truth_volume: Option<f64>,
    /// `blf` first, then `mv`, `gwmv`, `lwmv`. The `blf` volume is the
    /// posterior mean volume, not the size of the thresholded segmentation.
    pub methods: Vec<MethodReport>,
    pub segmentation_volume: f64,
    pub posterior_volume: VolumeSummary,
    pub retained_samples: usize,
    pub acceptance_rate_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteReport {
    pub truth_volume: Option<f64>,
    pub methods: Vec<MethodReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub blf: String,
    pub blf_core: String,
}

/// `run.json`. Contains nothing time- or host-dependent, so identical
/// manifests mean identical numeric outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub data_sha256: Option<String>,
    pub config: serde_json::Value,
    pub versions: Versions,
}

impl RunManifest {
    fn new<C: Serialize>(command: &str, seed: Option<u64>, config: &C, data: Option<&DataDir>) -> CliResult<Self> {
        let config =
            serde_json::to_value(config).map_err(|e| CliError::Invalid(format!("cannot serialise config: {e}")))?;
        let config_sha256 = sha256_hex(config.to_string().as_bytes());
        Ok(Self {
            command: command.into(),
            seed,
            config_sha256,
            data_sha256: data.map(data_digest),
            config,
            versions: Versions { blf: env!("CARGO_PKG_VERSION").into(), blf_core: blf_core::VERSION.into() },
        })
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of the numeric contents of a data directory (not its file bytes).
fn data_digest(d: &DataDir) -> String {
    let mut h = Sha256::new();
    h.update((d.height as u64).to_le_bytes());
    h.update((d.width as u64).to_le_bytes());
    h.update((d.labels.len() as u64).to_le_bytes());
    for l in &d.labels {
        h.update(l.iter().map(|&b| b as u8).collect::<Vec<_>>());
    }
    for x in d.target_intensity.iter().chain(d.rater_intensity.iter().flatten()) {
        h.update(x.to_bits().to_le_bytes());
    }
    if let Some(t) = &d.truth {
        h.update(t.iter().map(|&b| b as u8).collect::<Vec<_>>());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

#[derive(Debug, Clone, Serialize)]
struct SimulateRun<'a> {
    generator: &'a SimConfig,
}

pub fn simulate(config: &SimConfig, seed: u64, out: &Path) -> CliResult<()> {
    let inst = generate_simulation(config, seed)?;
    export_instance(&inst, out)?;
    write_json(
        &RunManifest::new("simulate", Some(seed), &SimulateRun { generator: config }, None)?,
        &out.join("run.json"),
    )
}

/// Chain settings for `fuse`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuseOptions {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub workers: usize,
    /// Overrides the config's threshold.
    pub threshold: Option<f64>,
}

impl Default for FuseOptions {
    fn default() -> Self {
        let s = SamplerConfig::default();
        Self {
            iterations: s.n_iterations,
            burn_in: s.burn_in,
            thin: s.thin,
            seed: s.rng_seed,
            workers: 1,
            threshold: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct FuseRun<'a> {
    model: &'a ModelConfig,
    iterations: usize,
    burn_in: usize,
    thin: usize,
    workers: usize,
}

/// The three voting baselines, in report order.
fn vote_segmentations(d: &DataDir, epsilon: f64) -> CliResult<Vec<(&'static str, Vec<bool>)>> {
    let gw = global_weights(&d.rater_intensity, &d.target_intensity, epsilon);
    let lw = local_weights(&d.rater_intensity, &d.target_intensity, epsilon);
    Ok(vec![
        ("mv", majority_vote(&d.labels)),
        ("gwmv", weighted_vote(&d.labels, VoteWeights::Global(&gw))?),
        ("lwmv", weighted_vote(&d.labels, VoteWeights::Local(&lw))?),
    ])
}

pub fn fuse(data_dir: &Path, model: &ModelConfig, opts: &FuseOptions, out: &Path) -> CliResult<FuseReport> {
    let mut model = model.clone();
    if let Some(t) = opts.threshold {
        model.threshold = t;
    }
    model.validate()?;
    let d = load_data_dir(data_dir)?;
    let graph = d.graph()?;
    let data = d.dataset(&model.covariates)?;
    let hyper = model.hyper(&data)?;
    let sampler = SamplerConfig {
        n_iterations: opts.iterations,
        burn_in: opts.burn_in,
        thin: opts.thin,
        rng_seed: opts.seed,
        n_workers: opts.workers,
        ..SamplerConfig::default()
    };
    sampler.validate()?;
    create_dir(out)?;

    let chain = run_chain(&data, &graph, &hyper, &sampler)?;
    let map = rb_probability_map(&chain)?;
    let seg = threshold_map(&map, model.threshold)?;
    let vols = volume_distribution(&chain)?;
    let (h, w) = (d.height, d.width);

    write_values_csv(h, w, &map.mean, &out.join("prob_mean.csv"))?;
    write_values_csv(h, w, &map.sd, &out.join("prob_sd.csv"))?;
    write_pgm16(h, w, &map.mean, &out.join("prob_mean.pgm"))?;
    write_mask_csv(h, w, &seg, &out.join("segmentation.csv"))?;
    write_values_csv(vols.len(), 1, &vols, &out.join("volume_samples.csv"))?;

    let traces = chain_traces(&chain);
    let mut header = vec!["iter".to_string()];
    header.extend(traces.iter().map(|(n, _)| n.clone()));
    let columns: Vec<Vec<f64>> = traces.iter().map(|(_, t)| t.clone()).collect();
    write_table_csv(&header, &chain.iterations, &columns, &out.join("traces.csv"))?;
    let diags: Vec<TraceDiagnostic> = traces.iter().map(|(n, t)| diagnose(n.as_str(), t)).collect();
    write_json(&diags, &out.join("diagnostics.json"))?;

    let truth = d.truth.as_deref();
    let mean_volume = vols.iter().sum::<f64>() / vols.len() as f64;
    let (lower, upper) =
        if vols.len() >= 2 { credible_interval(&vols, VOLUME_CI_LEVEL)? } else { (mean_volume, mean_volume) };
    let mut methods = vec![MethodReport::new("blf", mean_volume, &seg, truth)];
    for (name, s) in vote_segmentations(&d, model.covariates.epsilon)? {
        methods.push(MethodReport::new(name, volume(&s), &s, truth));
    }
    let report = FuseReport {
        truth_volume: truth.map(volume),
        methods,
        segmentation_volume: volume(&seg),
        posterior_volume: VolumeSummary { mean: mean_volume, level: VOLUME_CI_LEVEL, lower, upper },
        retained_samples: chain.len(),
        acceptance_rate_delta: chain.acceptance_rate_delta,
    };
    write_json(&report, &out.join("report.json"))?;
    let run = FuseRun {
        model: &model,
        iterations: opts.iterations,
        burn_in: opts.burn_in,
        thin: opts.thin,
        workers: opts.workers,
    };
    write_json(&RunManifest::new("fuse", Some(opts.seed), &run, Some(&d))?, &out.join("run.json"))?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
struct VoteRun {
    epsilon: f64,
}

/// Writes `{mv,gwmv,lwmv}_segmentation.csv` and `vote_report.json`.
pub fn vote(data_dir: &Path, epsilon: f64, out: &Path) -> CliResult<VoteReport> {
    if !(epsilon > 0.0) {
        return Err(CliError::Invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let d = load_data_dir(data_dir)?;
    create_dir(out)?;
    let truth = d.truth.as_deref();
    let mut methods = Vec::new();
    for (name, s) in vote_segmentations(&d, epsilon)? {
        write_mask_csv(d.height, d.width, &s, &out.join(format!("{name}_segmentation.csv")))?;
        methods.push(MethodReport::new(name, volume(&s), &s, truth));
    }
    let report = VoteReport { truth_volume: truth.map(volume), methods };
    write_json(&report, &out.join("vote_report.json"))?;
    write_json(&RunManifest::new("vote", None, &VoteRun { epsilon }, Some(&d))?, &out.join("run.json"))?;
    Ok(report)
}
