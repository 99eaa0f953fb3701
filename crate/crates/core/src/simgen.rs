//! Synthetic label fusion problems: one reliable atlas and several poor
//! atlases that agree with each other on a displaced structure.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::covariates::{assemble_dataset, CovariateOptions};
use crate::error::{invalid, Error, Result};
use crate::lattice::LatticeGraph;
use crate::math::{exp, sqrt};
use crate::metrics::dice;
use crate::model::FusionDataset;
use crate::rng::{Stream, StreamKey, StreamKind};

/// A Gaussian bump `amplitude · exp(−‖x − centre‖² / (2 sd²))`, centre in
/// fractions of the image height and width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub row: f64,
    pub col: f64,
    pub sd: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub height: usize,
    pub width: usize,
    /// Total raters; the first is the reliable one.
    pub n_raters: usize,
    pub bumps: Vec<Bump>,
    /// The truth is `Σ bumps ≥ threshold`.
    pub threshold: f64,
    /// Angular sectors used for boundary perturbations.
    pub sectors: usize,
    /// Chance that a sector of the reliable atlas is dilated or eroded by one pixel.
    pub good_perturb_prob: f64,
    /// Shared displacement `(rows, cols)` of the poor atlases.
    pub poor_shift: (i32, i32),
    /// Shared one-pixel dilation of the poor consensus.
    pub poor_dilate: bool,
    pub poor_perturb_prob: f64,
    pub background_intensity: f64,
    pub structure_intensity: f64,
    pub intensity_noise_sd: f64,
    /// Distractor disc centre in fractions of height and width.
    pub distractor_center: (f64, f64),
    pub distractor_radius: f64,
    pub distractor_intensity: f64,
    /// Baseline spread of every rater's intensity discrepancy.
    pub discrepancy_noise_sd: f64,
    /// Extra discrepancy on each poor atlas's (offset) error region.
    pub discrepancy_amplitude: f64,
    /// Offset, in pixels, between a poor atlas's errors and its large
    /// intensity discrepancies.
    pub discrepancy_offset: f64,
    /// Direction of that offset in degrees, measured from the displacement
    /// direction. At 90 the discrepancy slides along the error crescents.
    pub discrepancy_offset_angle: f64,
    /// Large discrepancy patch on the reliable atlas, so that its global
    /// intensity agreement is no better than the poor atlases'.
    pub good_discrepancy_center: (f64, f64),
    pub good_discrepancy_radius: f64,
    pub covariates: CovariateOptions,
    pub max_attempts: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            height: 40,
            width: 40,
            n_raters: 4,
            bumps: vec![
                Bump { row: 0.42, col: 0.40, sd: 5.0, amplitude: 1.0 },
                Bump { row: 0.58, col: 0.58, sd: 4.5, amplitude: 0.9 },
            ],
            threshold: 0.35,
            sectors: 8,
            good_perturb_prob: 0.25,
            poor_shift: (2, 4),
            poor_dilate: true,
            poor_perturb_prob: 0.25,
            background_intensity: 0.2,
            structure_intensity: 0.8,
            intensity_noise_sd: 0.05,
            distractor_center: (0.2, 0.8),
            distractor_radius: 4.0,
            distractor_intensity: 0.85,
            discrepancy_noise_sd: 0.08,
            discrepancy_amplitude: 0.5,
            discrepancy_offset: 3.0,
            discrepancy_offset_angle: 90.0,
            good_discrepancy_center: (0.78, 0.25),
            good_discrepancy_radius: 6.5,
            covariates: CovariateOptions::default(),
            max_attempts: 25,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return invalid("simulation grid dimensions must be positive");
        }
        if self.n_raters < 2 {
            return invalid("simulation needs one reliable and at least one poor rater");
        }
        if self.bumps.is_empty() || self.bumps.iter().any(|b| !(b.sd > 0.0)) {
            return invalid("simulation needs at least one bump with positive spread");
        }
        if self.sectors == 0 || self.max_attempts == 0 {
            return invalid("sectors and max_attempts must be positive");
        }
        for p in [self.good_perturb_prob, self.poor_perturb_prob] {
            if !(0.0..=1.0).contains(&p) {
                return invalid("perturbation probabilities must lie in [0, 1]");
            }
        }
        if !(self.intensity_noise_sd >= 0.0 && self.discrepancy_noise_sd >= 0.0) {
            return invalid("noise levels must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetadata {
    pub seed: u64,
    /// Zero-based attempt that satisfied every invariant.
    pub attempt: u32,
    pub config: SimConfig,
    pub good_dice: f64,
    pub poor_dice: Vec<f64>,
    pub min_poor_pairwise_dice: f64,
    pub distractor_overlap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimInstance {
    pub height: usize,
    pub width: usize,
    pub truth: Vec<bool>,
    pub dataset: FusionDataset,
    pub metadata: SimMetadata,
}

impl SimInstance {
    pub fn graph(&self) -> LatticeGraph {
        LatticeGraph::new(self.height, self.width).expect("instance dimensions are positive")
    }
}

/// Generates an instance, retrying with fresh streams until the reliable
/// atlas beats every poor one, the poor atlases agree pairwise (Dice ≥ 0.8),
/// the truth is one 8-connected component and the distractor barely
/// touches it.
pub fn generate_simulation(config: &SimConfig, seed: u64) -> Result<SimInstance> {
    config.validate()?;
    let graph = LatticeGraph::new(config.height, config.width)?;
    let mut last = String::new();
    for attempt in 0..config.max_attempts {
        match attempt_instance(config, &graph, seed, attempt) {
            Ok(inst) => return Ok(inst),
            Err(reason) => last = reason,
        }
    }
    Err(Error::Simulation { attempts: config.max_attempts, reason: last })
}

fn attempt_instance(
    config: &SimConfig,
    graph: &LatticeGraph,
    seed: u64,
    attempt: u32,
) -> core::result::Result<SimInstance, String> {
    let stream = |component: usize| StreamKey::new(seed, attempt as u64, StreamKind::Simulation, component, 0).stream();
    let (h, w) = (config.height as f64, config.width as f64);
    let n = graph.len();

    let mut jitter = stream(0);
    let field: Vec<f64> = {
        let bumps: Vec<(f64, f64, f64, f64)> = config
            .bumps
            .iter()
            .map(|b| (b.row * h + 0.5 * jitter.normal(), b.col * w + 0.5 * jitter.normal(), b.sd, b.amplitude))
            .collect();
        (0..n)
            .map(|v| {
                let (r, c) = graph.coords(v);
                bumps
                    .iter()
                    .map(|&(br, bc, sd, a)| {
                        let d2 = sq(r as f64 - br) + sq(c as f64 - bc);
                        a * exp(-0.5 * d2 / (sd * sd))
                    })
                    .sum()
            })
            .collect()
    };
    let truth: Vec<bool> = field.iter().map(|&f| f >= config.threshold).collect();
    if !truth.iter().any(|t| *t) {
        return Err("truth is empty; lower the threshold".into());
    }
    if component_count(&truth, graph) != 1 {
        return Err("truth is not a single 8-connected component".into());
    }

    let mut good_rng = stream(1);
    let good = perturb_arcs(&truth, graph, config.sectors, config.good_perturb_prob, &mut good_rng);
    let mut consensus = shift(&truth, graph, config.poor_shift);
    if config.poor_dilate {
        consensus = dilate4(&consensus, graph);
    }
    let poor: Vec<Vec<bool>> = (1..config.n_raters)
        .map(|r| {
            let mut rng = stream(1 + r);
            perturb_arcs(&consensus, graph, config.sectors, config.poor_perturb_prob, &mut rng)
        })
        .collect();

    let dice_or = |a: &[bool], b: &[bool]| dice(a, b).unwrap_or(0.0);
    let good_dice = dice_or(&good, &truth);
    let poor_dice: Vec<f64> = poor.iter().map(|p| dice_or(p, &truth)).collect();
    if poor_dice.iter().any(|&d| d >= good_dice) {
        return Err("a poor atlas matches the truth as well as the reliable one".into());
    }
    let mut min_pair = 1.0f64;
    for i in 0..poor.len() {
        for j in i + 1..poor.len() {
            min_pair = min_pair.min(dice_or(&poor[i], &poor[j]));
        }
    }
    if min_pair < 0.8 {
        return Err("poor atlases do not agree closely enough".into());
    }

    // Target intensity: structure level on the truth, a bright distractor disc
    // off the structure, Gaussian noise.
    let (dr, dc) = (config.distractor_center.0 * h, config.distractor_center.1 * w);
    let distractor: Vec<bool> = (0..n)
        .map(|v| {
            let (r, c) = graph.coords(v);
            sqrt(sq(r as f64 - dr) + sq(c as f64 - dc)) <= config.distractor_radius
        })
        .collect();
    let n_distractor = distractor.iter().filter(|d| **d).count();
    let overlap = if n_distractor == 0 {
        0.0
    } else {
        distractor.iter().zip(&truth).filter(|(d, t)| **d && **t).count() as f64 / n_distractor as f64
    };
    if overlap > 0.05 {
        return Err("distractor overlaps the truth".into());
    }
    let mut noise = stream(100);
    let target: Vec<f64> = (0..n)
        .map(|v| {
            let base = if truth[v] {
                config.structure_intensity
            } else if distractor[v] {
                config.distractor_intensity
            } else {
                config.background_intensity
            };
            base + config.intensity_noise_sd * noise.normal()
        })
        .collect();

    // Rater intensities: target plus a discrepancy field. Each poor atlas has
    // a large discrepancy on its error region, moved by the configured offset.
    let (sy, sx) = (config.poor_shift.0 as f64, config.poor_shift.1 as f64);
    let norm = sqrt(sy * sy + sx * sx);
    let offset = if norm > 0.0 {
        let (sin, cos) = libm::sincos(config.discrepancy_offset_angle.to_radians());
        let (dy, dx) = ((sy * cos - sx * sin) / norm, (sy * sin + sx * cos) / norm);
        (libm::round(config.discrepancy_offset * dy) as i32, libm::round(config.discrepancy_offset * dx) as i32)
    } else {
        (0, 0)
    };
    let (gr, gc) = (config.good_discrepancy_center.0 * h, config.good_discrepancy_center.1 * w);
    let labels: Vec<Vec<bool>> = core::iter::once(good).chain(poor).collect();
    let rater_intensity: Vec<Vec<f64>> = labels
        .iter()
        .enumerate()
        .map(|(r, lab)| {
            let mut rng = stream(200 + r);
            let patch: Vec<bool> = if r == 0 {
                (0..n)
                    .map(|v| {
                        let (rr, cc) = graph.coords(v);
                        sqrt(sq(rr as f64 - gr) + sq(cc as f64 - gc)) <= config.good_discrepancy_radius
                    })
                    .collect()
            } else {
                let errors: Vec<bool> = lab.iter().zip(&truth).map(|(a, b)| a != b).collect();
                shift(&errors, graph, offset)
            };
            (0..n)
                .map(|v| {
                    let extra = if patch[v] { config.discrepancy_amplitude } else { 0.0 };
                    target[v] + extra + config.discrepancy_noise_sd * rng.normal()
                })
                .collect()
        })
        .collect();

    let dataset = assemble_dataset(labels, target, rater_intensity, graph, &config.covariates)
        .map_err(|e| alloc::format!("covariate construction failed: {e}"))?;
    Ok(SimInstance {
        height: config.height,
        width: config.width,
        truth,
        dataset,
        metadata: SimMetadata {
            seed,
            attempt,
            config: config.clone(),
            good_dice,
            poor_dice,
            min_poor_pairwise_dice: min_pair,
            distractor_overlap: overlap,
        },
    })
}

#[inline]
fn sq(x: f64) -> f64 {
    x * x
}

/// Number of 8-connected foreground components.
pub fn component_count(mask: &[bool], graph: &LatticeGraph) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut stack = Vec::new();
    let mut count = 0;
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &u in graph.neighbors(v) {
                if mask[u] && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
    }
    count
}

fn neighbors4(graph: &LatticeGraph, v: usize) -> impl Iterator<Item = usize> + '_ {
    let (r, c) = graph.coords(v);
    let (h, w) = (graph.height(), graph.width());
    [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)]
        .into_iter()
        .filter(move |&(rr, cc)| rr < h && cc < w)
        .map(move |(rr, cc)| graph.index(rr, cc))
}

/// Translates a mask; pixels shifted in from outside are background.
pub fn shift(mask: &[bool], graph: &LatticeGraph, by: (i32, i32)) -> Vec<bool> {
    let (h, w) = (graph.height() as i64, graph.width() as i64);
    (0..mask.len())
        .map(|v| {
            let (r, c) = graph.coords(v);
            let (sr, sc) = (r as i64 - by.0 as i64, c as i64 - by.1 as i64);
            sr >= 0 && sc >= 0 && sr < h && sc < w && mask[graph.index(sr as usize, sc as usize)]
        })
        .collect()
}

fn dilate4(mask: &[bool], graph: &LatticeGraph) -> Vec<bool> {
    (0..mask.len()).map(|v| mask[v] || neighbors4(graph, v).any(|u| mask[u])).collect()
}

/// One-pixel dilation or erosion on randomly chosen angular sectors around
/// the mask centroid.
fn perturb_arcs(mask: &[bool], graph: &LatticeGraph, sectors: usize, prob: f64, rng: &mut Stream) -> Vec<bool> {
    let count = mask.iter().filter(|m| **m).count().max(1) as f64;
    let (mut cr, mut cc) = (0.0, 0.0);
    for v in (0..mask.len()).filter(|&v| mask[v]) {
        let (r, c) = graph.coords(v);
        cr += r as f64;
        cc += c as f64;
    }
    let (cr, cc) = (cr / count, cc / count);
    // 0 = untouched, 1 = dilate, 2 = erode.
    let actions: Vec<u8> = (0..sectors)
        .map(|_| {
            let u = rng.uniform();
            if u < 0.5 * prob {
                1
            } else if u < prob {
                2
            } else {
                0
            }
        })
        .collect();
    let sector_of = |v: usize| {
        let (r, c) = graph.coords(v);
        let angle = libm::atan2(r as f64 - cr, c as f64 - cc) + core::f64::consts::PI;
        ((angle / (2.0 * core::f64::consts::PI) * sectors as f64) as usize).min(sectors - 1)
    };
    (0..mask.len())
        .map(|v| match actions[sector_of(v)] {
            1 => mask[v] || neighbors4(graph, v).any(|u| mask[u]),
            2 => mask[v] && neighbors4(graph, v).all(|u| mask[u]),
            _ => mask[v],
        })
        .collect()
}
