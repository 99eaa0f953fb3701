mod common;

use blf_core::covariates::{signed_distance_transform, squared_edt, weighted_sdl, SdlMap};
use blf_core::diagnostics::{geweke_z, lag1_autocorr};
use blf_core::metrics::{dice, global_weights, majority_vote, weighted_vote, VoteWeights};
use blf_core::rng::{Stream, StreamKey, StreamKind};
use blf_core::samplers::{run_chain, sample_truncated_normal};
use blf_core::summaries::{credible_interval, probability_map_from_samples, quantile_unsorted};
use blf_core::{Coloring, HyperConfig, LatticeGraph, LinkFunction, SamplerConfig};
use proptest::prelude::*;

fn mask(h: usize, w: usize) -> impl Strategy<Value = (usize, usize, Vec<bool>)> {
    (1..=h, 1..=w).prop_flat_map(|(h, w)| (Just(h), Just(w), proptest::collection::vec(any::<bool>(), h * w)))
}

fn labels(max_r: usize, max_v: usize) -> impl Strategy<Value = Vec<Vec<bool>>> {
    (1..=max_r, 1..=max_v)
        .prop_flat_map(|(r, v)| proptest::collection::vec(proptest::collection::vec(any::<bool>(), v), r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lattice_adjacency_is_symmetric(h in 1usize..12, w in 1usize..12) {
        let g = LatticeGraph::new(h, w).unwrap();
        for v in 0..g.len() {
            prop_assert!(g.degree(v) <= 8);
            prop_assert!(!g.neighbors(v).contains(&v));
            for &u in g.neighbors(v) {
                prop_assert!(g.neighbors(u).contains(&v));
            }
            let (r, c) = g.coords(v);
            if r > 0 && c > 0 && r + 1 < h && c + 1 < w {
                prop_assert_eq!(g.degree(v), 8);
            }
        }
    }

    #[test]
    fn coloring_is_proper_partition(h in 1usize..15, w in 1usize..15) {
        let g = LatticeGraph::new(h, w).unwrap();
        let col = Coloring::for_lattice(&g);
        prop_assert_eq!(col.monochromatic_edges(&g), 0);
        let mut seen = vec![0u8; g.len()];
        for (k, class) in col.classes.iter().enumerate() {
            for &v in class {
                seen[v] += 1;
                prop_assert_eq!(col.color[v] as usize, k);
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn sdl_signs_and_bounds((h, w, m) in mask(10, 10)) {
        let g = LatticeGraph::new(h, w).unwrap();
        let sdl = signed_distance_transform(&m, &g);
        let diag = g.diagonal();
        prop_assert!(sdl.values.iter().all(|d| d.abs() <= diag + 1e-12));
        if sdl.degenerate {
            return Ok(());
        }
        for v in 0..g.len() {
            let d = sdl.values[v];
            let boundary = m[v] && g.neighbors(v).iter().any(|&u| !m[u]);
            if boundary {
                prop_assert_eq!(d, 0.0);
            } else if m[v] {
                prop_assert!(d < 0.0);
            } else {
                prop_assert!(d > 0.0);
            }
        }
    }

    #[test]
    fn sdl_is_lipschitz((h, w, m) in mask(9, 9)) {
        let g = LatticeGraph::new(h, w).unwrap();
        let sdl = signed_distance_transform(&m, &g);
        let euclid = |a: usize, b: usize| {
            let ((ra, ca), (rb, cb)) = (g.coords(a), g.coords(b));
            (((ra as f64 - rb as f64).powi(2)) + ((ca as f64 - cb as f64).powi(2))).sqrt()
        };
        for a in 0..g.len() {
            for b in 0..g.len() {
                let (da, db) = (sdl.values[a], sdl.values[b]);
                prop_assert!((da.abs() - db.abs()).abs() <= euclid(a, b) + 1e-9);
            }
            for &b in g.neighbors(a) {
                prop_assert!((sdl.values[a] - sdl.values[b]).abs() <= euclid(a, b) + 1e-9);
            }
        }
    }

    #[test]
    fn edt_matches_brute_force((h, w, seeds) in mask(8, 8)) {
        let d2 = squared_edt(&seeds, h, w);
        for (v, &got) in d2.iter().enumerate() {
            let (r, c) = (v / w, v % w);
            let want = (0..h * w)
                .filter(|&u| seeds[u])
                .map(|u| ((u / w) as f64 - r as f64).powi(2) + ((u % w) as f64 - c as f64).powi(2))
                .fold(f64::INFINITY, f64::min);
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn weighted_sdl_is_convex_combination(
        vals in proptest::collection::vec(proptest::collection::vec(-20.0f64..20.0, 6), 1..5),
        seed in any::<u64>(),
    ) {
        let mut rng = Stream::seeded(seed);
        let maps: Vec<SdlMap> = vals.iter().map(|v| SdlMap { values: v.clone(), source: None, degenerate: false }).collect();
        let target: Vec<f64> = (0..6).map(|_| rng.uniform()).collect();
        let ints: Vec<Vec<f64>> = vals.iter().map(|_| (0..6).map(|_| rng.uniform()).collect()).collect();
        let c = weighted_sdl(&maps, &ints, &target, 1e-6, false).unwrap();
        for v in 0..6 {
            let lo = vals.iter().map(|m| m[v]).fold(f64::INFINITY, f64::min);
            let hi = vals.iter().map(|m| m[v]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(c[v] >= lo - 1e-9 && c[v] <= hi + 1e-9);
        }
        // Equal intensities give the plain average.
        let same = vec![target.clone(); vals.len()];
        let c = weighted_sdl(&maps, &same, &target, 1e-6, false).unwrap();
        for v in 0..6 {
            let avg = vals.iter().map(|m| m[v]).sum::<f64>() / vals.len() as f64;
            prop_assert!((c[v] - avg).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_weighted_vote_is_majority(l in labels(7, 30)) {
        let r = l.len();
        let w = vec![1.0 / r as f64; r];
        prop_assert_eq!(weighted_vote(&l, VoteWeights::Global(&w)).unwrap(), majority_vote(&l));
    }

    #[test]
    fn global_weights_sum_to_one(r in 1usize..6, seed in any::<u64>()) {
        let mut rng = Stream::seeded(seed);
        let target: Vec<f64> = (0..20).map(|_| rng.uniform()).collect();
        let ints: Vec<Vec<f64>> = (0..r).map(|_| (0..20).map(|_| rng.uniform()).collect()).collect();
        let w = global_weights(&ints, &target, 1e-6);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn dice_bounds_and_symmetry(a in proptest::collection::vec(any::<bool>(), 1..50), seed in any::<u64>()) {
        let mut rng = Stream::seeded(seed);
        let b: Vec<bool> = a.iter().map(|_| rng.bernoulli(0.5)).collect();
        match (dice(&a, &b), dice(&b, &a)) {
            (Ok(x), Ok(y)) => {
                prop_assert_eq!(x, y);
                prop_assert!((0.0..=1.0).contains(&x));
            }
            (Err(_), Err(_)) => prop_assert!(a.iter().chain(&b).all(|x| !x)),
            _ => prop_assert!(false, "asymmetric failure"),
        }
        if a.iter().any(|x| *x) {
            prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
        }
    }

    #[test]
    fn probability_map_bounds(samples in proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, 5), 1..40)) {
        let map = probability_map_from_samples(&samples).unwrap();
        for (m, s) in map.mean.iter().zip(&map.sd) {
            prop_assert!((0.0..=1.0).contains(m));
            prop_assert!(*s >= 0.0);
            // Sample sd of values in [0, 1] is at most 1/2 · √(n / (n − 1)).
            let n = samples.len() as f64;
            prop_assert!(*s <= 0.5 * (n / (n - 1.0).max(1.0)).sqrt() + 1e-12);
        }
    }

    #[test]
    fn credible_interval_is_ordered(xs in proptest::collection::vec(-100.0f64..100.0, 2..200), level in 0.01f64..0.99) {
        let (lo, hi) = credible_interval(&xs, level).unwrap();
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min <= lo && lo <= hi && hi <= max);
        prop_assert!(quantile_unsorted(&xs, 0.25) <= quantile_unsorted(&xs, 0.75));
    }

    #[test]
    fn diagnostics_affine_invariance(seed in any::<u64>(), a in 0.01f64..100.0, b in -100.0f64..100.0) {
        let mut rng = Stream::seeded(seed);
        let x: Vec<f64> = (0..500).map(|_| rng.normal()).collect();
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let (zx, zy) = (geweke_z(&x, 0.1, 0.5).unwrap(), geweke_z(&y, 0.1, 0.5).unwrap());
        prop_assert!((zx - zy).abs() <= 1e-8 * zx.abs().max(1.0));
        let neg: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
        prop_assert!((geweke_z(&neg, 0.1, 0.5).unwrap() + zx).abs() <= 1e-8 * zx.abs().max(1.0));
        let (rx, ry) = (lag1_autocorr(&x).unwrap(), lag1_autocorr(&y).unwrap());
        prop_assert!((rx - ry).abs() <= 1e-9);
    }

    #[test]
    fn link_inverse_is_monotone_in_unit_interval(u in -30.0f64..30.0, du in 1e-6f64..5.0) {
        for link in [LinkFunction::Logistic, LinkFunction::Probit] {
            let (p, q) = (link.inverse(u), link.inverse(u + du));
            prop_assert!(p > 0.0 && p < 1.0);
            prop_assert!(q >= p);
        }
    }

    #[test]
    fn truncated_normal_respects_bounds(
        mu in -10.0f64..10.0,
        sigma in 0.01f64..10.0,
        a in -50.0f64..50.0,
        width in 1e-6f64..20.0,
        seed in any::<u64>(),
    ) {
        let mut rng = Stream::seeded(seed);
        for (lo, hi) in [(a, a + width), (a, f64::INFINITY), (f64::NEG_INFINITY, a)] {
            let x = sample_truncated_normal(mu, sigma, lo, hi, &mut rng).unwrap();
            prop_assert!(x > lo && x < hi, "{x} not in ({lo}, {hi})");
        }
    }

    #[test]
    fn streams_are_pure_functions_of_key(seed in any::<u64>(), sweep in any::<u64>(), r in 0usize..8, v in 0usize..10_000) {
        let key = StreamKey::new(seed, sweep, StreamKind::Phi, r, v);
        let (mut s1, mut s2) = (key.stream(), key.stream());
        for _ in 0..4 {
            prop_assert_eq!(s1.next_u64(), s2.next_u64());
        }
        let other = StreamKey::new(seed, sweep, StreamKind::Eta, r, v).stream().next_u64();
        prop_assert_ne!(key.stream().next_u64(), other);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn chain_output_bounds(h in 2usize..5, w in 2usize..5, r in 1usize..4, seed in any::<u64>()) {
        let g = LatticeGraph::new(h, w).unwrap();
        let mut rng = Stream::seeded(seed);
        let data = common::random_dataset(g.len(), r, &mut rng);
        let hyper = HyperConfig::for_dataset(&data);
        let cfg = SamplerConfig { n_iterations: 60, burn_in: 10, thin: 5, rng_seed: seed, ..Default::default() };
        let out = run_chain(&data, &g, &hyper, &cfg).unwrap();
        prop_assert_eq!(out.rb_prob_samples.len(), cfg.n_retained());
        for (p, m) in out.rb_prob_samples.iter().zip(&out.volume_samples) {
            prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
            prop_assert!(*m >= 0.0 && *m <= g.len() as f64);
        }
        prop_assert!(out.tau_phi_samples.iter().flatten().chain(out.tau_eta_samples.iter().flatten()).all(|t| *t > 0.0));
        prop_assert!((0.0..=1.0).contains(&out.acceptance_rate_delta));
    }
}
