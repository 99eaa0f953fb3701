//! True-status covariates: signed distance label maps, their
//! intensity-weighted fusion, and the regression design.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::lattice::LatticeGraph;
use crate::linalg::Matrix;
use crate::math::sqrt;

/// Signed distance label map of one binary image: negative strictly inside,
/// zero on the boundary, positive outside.
#[derive(Debug, Clone, PartialEq)]
pub struct SdlMap {
    pub values: Vec<f64>,
    pub source: Option<usize>,
    /// Set when the image has no boundary (all foreground or all background);
    /// every value is then the image diagonal.
    pub degenerate: bool,
}

/// Boundary pixels: foreground with at least one 8-adjacent background pixel.
pub fn boundary_pixels(binary: &[bool], graph: &LatticeGraph) -> Vec<bool> {
    (0..graph.len()).map(|v| binary[v] && graph.neighbors(v).iter().any(|&u| !binary[u])).collect()
}

/// Exact signed Euclidean distance to the boundary set.
pub fn signed_distance_transform(binary: &[bool], graph: &LatticeGraph) -> SdlMap {
    assert_eq!(binary.len(), graph.len(), "mask size must match the lattice");
    let boundary = boundary_pixels(binary, graph);
    if !boundary.iter().any(|b| *b) {
        return SdlMap { values: vec![graph.diagonal(); graph.len()], source: None, degenerate: true };
    }
    let sq = squared_edt(&boundary, graph.height(), graph.width());
    let values = sq
        .iter()
        .zip(binary)
        .map(|(&d2, &fg)| {
            let d = sqrt(d2);
            if fg {
                -d
            } else {
                d
            }
        })
        .collect();
    SdlMap { values, source: None, degenerate: false }
}

/// Squared Euclidean distance to the nearest `true` pixel, by two separable
/// passes of the lower-envelope-of-parabolas transform.
pub fn squared_edt(seeds: &[bool], height: usize, width: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = seeds.iter().map(|&s| if s { 0.0 } else { f64::INFINITY }).collect();
    let mut f = vec![0.0; height.max(width)];
    let mut out = vec![0.0; height.max(width)];
    let mut hull_v = vec![0usize; height.max(width)];
    let mut hull_z = vec![0.0; height.max(width) + 1];
    for c in 0..width {
        for r in 0..height {
            f[r] = grid[r * width + c];
        }
        edt_1d(&f[..height], &mut out[..height], &mut hull_v, &mut hull_z);
        for r in 0..height {
            grid[r * width + c] = out[r];
        }
    }
    for r in 0..height {
        f[..width].copy_from_slice(&grid[r * width..(r + 1) * width]);
        edt_1d(&f[..width], &mut out[..width], &mut hull_v, &mut hull_z);
        grid[r * width..(r + 1) * width].copy_from_slice(&out[..width]);
    }
    grid
}

fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let first = match (0..n).find(|&q| f[q].is_finite()) {
        Some(q) => q,
        None => {
            d.iter_mut().for_each(|x| *x = f64::INFINITY);
            return;
        }
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let qf = q as f64;
        loop {
            let p = v[k] as f64;
            let s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * (qf - p));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere.
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
            }
            break;
        }
    }
    let mut k = 0usize;
    for (q, out) in d.iter_mut().enumerate().take(n) {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *out = (qf - p) * (qf - p) + f[v[k]];
    }
}

/// Intensity-weighted fusion of SDL maps,
/// `c_v = Σ_r w_r(v) d_r(v) / Σ_r w_r(v)` with
/// `w_r(v) = ((i_r(v) − i_t(v))² + ε)⁻¹`. With `rescale` the result is
/// min–max scaled to `[0, 1]` over the image.
pub fn weighted_sdl(
    sdl: &[SdlMap],
    rater_intensity: &[Vec<f64>],
    target_intensity: &[f64],
    epsilon: f64,
    rescale: bool,
) -> Result<Vec<f64>> {
    if sdl.is_empty() || sdl.len() != rater_intensity.len() {
        return invalid("weighted SDL needs one intensity image per SDL map");
    }
    let n = target_intensity.len();
    if sdl.iter().any(|m| m.values.len() != n) || rater_intensity.iter().any(|i| i.len() != n) {
        return invalid("weighted SDL inputs must all have one value per voxel");
    }
    if !(epsilon >= 0.0) {
        return invalid("epsilon must be non-negative");
    }
    let mut out: Vec<f64> = (0..n)
        .map(|v| {
            let (mut num, mut den) = (0.0, 0.0);
            let mut exact: Option<(f64, usize)> = None;
            for (m, ir) in sdl.iter().zip(rater_intensity) {
                let diff = ir[v] - target_intensity[v];
                let w = 1.0 / (diff * diff + epsilon);
                if w.is_infinite() {
                    let e = exact.get_or_insert((0.0, 0));
                    e.0 += m.values[v];
                    e.1 += 1;
                } else {
                    num += w * m.values[v];
                    den += w;
                }
            }
            match exact {
                Some((s, k)) => s / k as f64,
                None => num / den,
            }
        })
        .collect();
    if rescale {
        rescale_unit(&mut out);
    }
    Ok(out)
}

/// Min–max scaling to `[0, 1]`; a constant vector maps to zeros.
pub fn rescale_unit(xs: &mut [f64]) {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span > 0.0 {
        xs.iter_mut().for_each(|x| *x = (*x - lo) / span);
    } else {
        xs.iter_mut().for_each(|x| *x = 0.0);
    }
}

/// Design `[1, c1, c2, c1·c2]` (or without the interaction).
pub fn build_design(c1: &[f64], c2: &[f64], with_interaction: bool) -> Result<Matrix> {
    if c1.len() != c2.len() {
        return invalid(alloc::format!("covariate lengths differ: {} vs {}", c1.len(), c2.len()));
    }
    let j = if with_interaction { 4 } else { 3 };
    let mut data = Vec::with_capacity(c1.len() * j);
    for (&a, &b) in c1.iter().zip(c2) {
        data.extend_from_slice(&[1.0, a, b]);
        if with_interaction {
            data.push(a * b);
        }
    }
    Matrix::from_row_major(c1.len(), j, data)
}

/// Options for turning labels and intensities into a regression design.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct CovariateOptions {
    pub epsilon: f64,
    pub rescale_distance: bool,
    pub with_interaction: bool,
}

impl Default for CovariateOptions {
    fn default() -> Self {
        Self { epsilon: crate::metrics::DEFAULT_EPSILON, rescale_distance: false, with_interaction: true }
    }
}

/// Weighted SDL and target intensity for a label set.
pub fn true_status_covariates(
    labels: &[Vec<bool>],
    rater_intensity: &[Vec<f64>],
    target_intensity: &[f64],
    graph: &LatticeGraph,
    options: &CovariateOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let maps = rater_sdl_maps(labels, graph);
    let c1 = weighted_sdl(&maps, rater_intensity, target_intensity, options.epsilon, options.rescale_distance)?;
    Ok((c1, target_intensity.to_vec()))
}

/// Builds the full dataset (design included) from raw labels and intensities.
pub fn assemble_dataset(
    labels: Vec<Vec<bool>>,
    target_intensity: Vec<f64>,
    rater_intensity: Vec<Vec<f64>>,
    graph: &LatticeGraph,
    options: &CovariateOptions,
) -> Result<crate::model::FusionDataset> {
    if labels.iter().any(|l| l.len() != graph.len()) || target_intensity.len() != graph.len() {
        return invalid("labels and intensities must match the lattice size");
    }
    let (c1, c2) = true_status_covariates(&labels, &rater_intensity, &target_intensity, graph, options)?;
    let design = build_design(&c1, &c2, options.with_interaction)?;
    crate::model::FusionDataset::new(labels, target_intensity, rater_intensity, design)
}

/// SDL maps for every rater of a label set (`[rater][voxel]`).
pub fn rater_sdl_maps(labels: &[Vec<bool>], graph: &LatticeGraph) -> Vec<SdlMap> {
    labels.iter().enumerate().map(|(r, l)| SdlMap { source: Some(r), ..signed_distance_transform(l, graph) }).collect()
}
