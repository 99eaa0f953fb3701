//! Argument parsing and the exit-code contract: 0 on success, 1 on a
//! runtime failure, 2 on bad usage. Messages go to standard error.

use std::ffi::OsString;
use std::path::PathBuf;

use blf_core::metrics::DEFAULT_EPSILON;
use blf_core::simgen::SimConfig;
use clap::{Args, Parser, Subcommand};

use crate::config::ModelConfig;
use crate::error::CliResult;
use crate::io::read_json;
use crate::pipeline::{fuse, simulate, vote, FuseOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "blf", version, about = "Bayesian spatial label fusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic instance (one reliable atlas, several poor ones).
    Simulate(SimulateArgs),
    /// Run the sampler on a data directory and write maps, traces and reports.
    Fuse(FuseArgs),
    /// Run majority, globally weighted and locally weighted voting.
    Vote(VoteArgs),
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err("must lie in [0, 1]".into())
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err("must lie strictly between 0 and 1".into())
    }
}

fn positive_float(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err("must be positive".into())
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_parser = positive)]
    pub height: Option<usize>,
    #[arg(long, value_parser = positive)]
    pub width: Option<usize>,
    #[arg(long, value_parser = positive)]
    pub raters: Option<usize>,
    /// Generator parameters as JSON; flags below override it.
    #[arg(long)]
    pub generator: Option<PathBuf>,
    /// Per-sector boundary perturbation probability of the reliable atlas.
    #[arg(long, value_parser = probability)]
    pub good_perturb_prob: Option<f64>,
    /// Per-sector boundary perturbation probability of the poor atlases.
    #[arg(long, value_parser = probability)]
    pub poor_perturb_prob: Option<f64>,
    /// Shared displacement of the poor atlases, as ROWS,COLS.
    #[arg(long, value_parser = shift, allow_hyphen_values = true)]
    pub poor_shift: Option<(i32, i32)>,
    /// Offset in pixels of the intensity discrepancies from the poor atlases' errors.
    #[arg(long)]
    pub discrepancy_offset: Option<f64>,
    #[arg(long)]
    pub intensity_noise_sd: Option<f64>,
}

fn shift(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s.split_once(',').ok_or("expected ROWS,COLS")?;
    Ok((a.trim().parse().map_err(|_| "bad row shift")?, b.trim().parse().map_err(|_| "bad column shift")?))
}

impl SimulateArgs {
    pub fn generator_config(&self) -> CliResult<SimConfig> {
        let mut c = match &self.generator {
            Some(p) => read_json(p)?,
            None => SimConfig::default(),
        };
        if let Some(h) = self.height {
            c.height = h;
        }
        if let Some(w) = self.width {
            c.width = w;
        }
        if let Some(r) = self.raters {
            c.n_raters = r;
        }
        if let Some(p) = self.good_perturb_prob {
            c.good_perturb_prob = p;
        }
        if let Some(p) = self.poor_perturb_prob {
            c.poor_perturb_prob = p;
        }
        if let Some(s) = self.poor_shift {
            c.poor_shift = s;
        }
        if let Some(o) = self.discrepancy_offset {
            c.discrepancy_offset = o;
        }
        if let Some(sd) = self.intensity_noise_sd {
            c.intensity_noise_sd = sd;
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Model configuration (JSON). Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000, value_parser = positive)]
    pub iters: usize,
    /// Discarded iterations; half of `--iters` by default.
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long, default_value_t = 25, value_parser = positive)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = open_unit)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VoteArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Regulariser in the intensity-agreement weights.
    #[arg(long, default_value_t = DEFAULT_EPSILON, value_parser = positive_float)]
    pub epsilon: f64,
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a.generator_config()?, a.seed, &a.out),
        Command::Fuse(a) => {
            let model = match &a.config {
                Some(p) => read_json(p)?,
                None => ModelConfig::default(),
            };
            let opts = FuseOptions {
                iterations: a.iters,
                burn_in: a.burnin.unwrap_or(a.iters / 2),
                thin: a.thin,
                seed: a.seed,
                workers: a.workers,
                threshold: a.threshold,
            };
            fuse(&a.data, &model, &opts, &a.out).map(|_| ())
        }
        Command::Vote(a) => vote(&a.data, a.epsilon, &a.out).map(|_| ()),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
