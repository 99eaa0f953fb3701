//! Data directories: the on-disk layout of one label fusion problem.
//!
//! ```text
//! truth.csv                 optional, 0/1, H×W
//! target_intensity.csv      H×W
//! rater_{r}_labels.csv      0/1, H×W, r = 1, 2, …
//! rater_{r}_intensity.csv   H×W
//! meta.json                 optional, generator parameters
//! ```

use std::path::{Path, PathBuf};

use blf_core::covariates::{assemble_dataset, CovariateOptions};
use blf_core::simgen::{SimInstance, SimMetadata};
use blf_core::{FusionDataset, LatticeGraph};

use crate::error::{CliError, CliResult};
use crate::io::{read_json, read_mask_csv, read_matrix_csv, write_json, write_mask_csv, write_values_csv};

pub const TRUTH_FILE: &str = "truth.csv";
pub const TARGET_FILE: &str = "target_intensity.csv";
pub const META_FILE: &str = "meta.json";

pub fn rater_labels_file(r: usize) -> String {
    format!("rater_{r}_labels.csv")
}

pub fn rater_intensity_file(r: usize) -> String {
    format!("rater_{r}_intensity.csv")
}

/// Raw contents of a data directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DataDir {
    pub height: usize,
    pub width: usize,
    pub truth: Option<Vec<bool>>,
    pub labels: Vec<Vec<bool>>,
    pub target_intensity: Vec<f64>,
    pub rater_intensity: Vec<Vec<f64>>,
    pub meta: Option<SimMetadata>,
}

impl DataDir {
    pub fn graph(&self) -> CliResult<LatticeGraph> {
        Ok(LatticeGraph::new(self.height, self.width)?)
    }

    /// Builds the regression design and the dataset.
    pub fn dataset(&self, options: &CovariateOptions) -> CliResult<FusionDataset> {
        let graph = self.graph()?;
        Ok(assemble_dataset(
            self.labels.clone(),
            self.target_intensity.clone(),
            self.rater_intensity.clone(),
            &graph,
            options,
        )?)
    }
}

pub fn export_instance(inst: &SimInstance, dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let (h, w) = (inst.height, inst.width);
    let d = &inst.dataset;
    write_mask_csv(h, w, &inst.truth, &dir.join(TRUTH_FILE))?;
    write_values_csv(h, w, &d.target_intensity, &dir.join(TARGET_FILE))?;
    for r in 0..d.n_raters() {
        write_mask_csv(h, w, &d.labels[r], &dir.join(rater_labels_file(r + 1)))?;
        write_values_csv(h, w, &d.rater_intensity[r], &dir.join(rater_intensity_file(r + 1)))?;
    }
    write_json(&inst.metadata, &dir.join(META_FILE))
}

fn require(path: PathBuf) -> CliResult<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Missing(path))
    }
}

fn check_shape(path: &Path, got: (usize, usize), want: (usize, usize)) -> CliResult<()> {
    if got != want {
        return Err(CliError::Invalid(format!(
            "{}: shape {}x{} does not match the target image {}x{}",
            path.display(),
            got.0,
            got.1,
            want.0,
            want.1
        )));
    }
    Ok(())
}

pub fn load_data_dir(dir: &Path) -> CliResult<DataDir> {
    if !dir.is_dir() {
        return Err(CliError::Missing(dir.to_path_buf()));
    }
    let target_path = require(dir.join(TARGET_FILE))?;
    let target = read_matrix_csv(&target_path)?;
    let shape = (target.rows(), target.cols());
    if shape.0 == 0 || shape.1 == 0 {
        return Err(CliError::Invalid(format!("{}: the image is empty", target_path.display())));
    }

    let mut labels = Vec::new();
    let mut rater_intensity = Vec::new();
    for r in 1.. {
        let lp = dir.join(rater_labels_file(r));
        if !lp.is_file() {
            if r == 1 {
                return Err(CliError::Missing(lp));
            }
            break;
        }
        let (h, w, mask) = read_mask_csv(&lp)?;
        check_shape(&lp, (h, w), shape)?;
        let ip = require(dir.join(rater_intensity_file(r)))?;
        let m = read_matrix_csv(&ip)?;
        check_shape(&ip, (m.rows(), m.cols()), shape)?;
        labels.push(mask);
        rater_intensity.push(m.as_slice().to_vec());
    }

    let truth_path = dir.join(TRUTH_FILE);
    let truth = if truth_path.is_file() {
        let (h, w, mask) = read_mask_csv(&truth_path)?;
        check_shape(&truth_path, (h, w), shape)?;
        Some(mask)
    } else {
        None
    };
    let meta_path = dir.join(META_FILE);
    let meta = if meta_path.is_file() { Some(read_json(&meta_path)?) } else { None };

    Ok(DataDir {
        height: shape.0,
        width: shape.1,
        truth,
        labels,
        target_intensity: target.as_slice().to_vec(),
        rater_intensity,
        meta,
    })
}

/// Reloads an exported simulation. The design is rebuilt with the
/// covariate options recorded in `meta.json`.
pub fn load_instance(dir: &Path) -> CliResult<SimInstance> {
    let data = load_data_dir(dir)?;
    let meta = data.meta.clone().ok_or_else(|| CliError::Missing(dir.join(META_FILE)))?;
    let truth = data.truth.clone().ok_or_else(|| CliError::Missing(dir.join(TRUTH_FILE)))?;
    let dataset = data.dataset(&meta.config.covariates)?;
    Ok(SimInstance { height: data.height, width: data.width, truth, dataset, metadata: meta })
}
