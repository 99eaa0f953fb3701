#![allow(dead_code)]

use blf_core::rng::Stream;
use blf_core::{FusionDataset, Matrix};

/// Standard normal CDF from `erfc`, independent of the crate's own routines.
pub fn phi_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Random dataset on `v` voxels with `r` raters and design `[1, c]`.
pub fn random_dataset(v: usize, r: usize, rng: &mut Stream) -> FusionDataset {
    let labels = (0..r).map(|_| (0..v).map(|_| rng.bernoulli(0.5)).collect()).collect();
    let target: Vec<f64> = (0..v).map(|_| rng.uniform()).collect();
    let rater_int = (0..r).map(|_| (0..v).map(|_| rng.uniform()).collect()).collect();
    let mut rows = Vec::with_capacity(v * 2);
    for _ in 0..v {
        rows.push(1.0);
        rows.push(rng.normal());
    }
    FusionDataset::new(labels, target, rater_int, Matrix::from_row_major(v, 2, rows).unwrap()).unwrap()
}

/// Intercept-only dataset with one rater whose labels are irrelevant.
pub fn intercept_only(v: usize) -> FusionDataset {
    FusionDataset::new(
        vec![vec![false; v]],
        vec![0.0; v],
        vec![vec![0.0; v]],
        Matrix::from_row_major(v, 1, vec![1.0; v]).unwrap(),
    )
    .unwrap()
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Batch-means Monte Carlo standard error with `⌊√n⌋` batches.
pub fn batch_mcse(xs: &[f64]) -> f64 {
    let n = xs.len();
    let nb = (n as f64).sqrt() as usize;
    let size = n / nb;
    let means: Vec<f64> = xs[..nb * size].chunks(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let grand = means.iter().sum::<f64>() / nb as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (nb - 1) as f64;
    (var / nb as f64).sqrt()
}
