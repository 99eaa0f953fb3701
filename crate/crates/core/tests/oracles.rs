//! Samplers and densities checked against independent dense or brute-force
//! computations.

mod common;

use blf_core::model::{log_joint, Reliability};
use blf_core::priors::{cmp_log_prior, cmp_log_prior_grad, CmpSpec};
use blf_core::rng::Stream;
use blf_core::samplers::{coefficient_conditional, spatial_conditional, update_delta_gamerman, KernelMask};
use blf_core::{
    FusionDataset, HyperConfig, LatticeGraph, LinkFunction, Matrix, ModelState, PriorDelta, Sampler, SamplerConfig,
};
use common::*;

fn random_state(data: &FusionDataset, rng: &mut Stream) -> ModelState {
    let hyper = HyperConfig::for_dataset(data);
    let mut s = ModelState::initial(data, &hyper);
    let v = data.n_voxels();
    s.t = (0..v).map(|_| rng.bernoulli(0.5)).collect();
    for r in 0..data.n_raters() {
        s.phi[r] = (0..v).map(|_| rng.normal()).collect();
        s.eta[r] = (0..v).map(|_| rng.normal()).collect();
        s.zeta1[r] = (0..v).map(|_| 2.0 * rng.normal()).collect();
        s.zeta0[r] = (0..v).map(|_| 2.0 * rng.normal()).collect();
        s.tau_phi[r] = 0.2 + 3.0 * rng.uniform();
        s.tau_eta[r] = 0.2 + 3.0 * rng.uniform();
    }
    s.delta = (0..data.n_covariates()).map(|_| rng.normal()).collect();
    s
}

/// Dense `D − ρW`.
fn car_matrix(graph: &LatticeGraph, rho: f64) -> Matrix {
    let n = graph.len();
    let mut m = Matrix::zeros(n, n);
    for v in 0..n {
        m[(v, v)] = graph.degree(v) as f64;
        for &u in graph.neighbors(v) {
            m[(v, u)] -= rho;
        }
    }
    m
}

fn submatrix(m: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    let data = rows.iter().flat_map(|&i| cols.iter().map(move |&j| m[(i, j)])).collect();
    Matrix::from_row_major(rows.len(), cols.len(), data).unwrap()
}

#[test]
fn single_site_conditionals_match_dense_gaussian() {
    let graph = LatticeGraph::new(3, 3).unwrap();
    let mut rng = Stream::seeded(11);
    let data = random_dataset(9, 1, &mut rng);
    let hyper = HyperConfig::for_dataset(&data).with_rho(0.9, 0.7).unwrap();
    for rep in 0..5 {
        let state = random_state(&data, &mut rng);
        for which in [Reliability::Sensitivity, Reliability::Specificity] {
            let (field, zeta, tau, active): (&[f64], &[f64], f64, Vec<f64>) = match which {
                Reliability::Sensitivity => (
                    &state.phi[0],
                    &state.zeta1[0],
                    state.tau_phi[0],
                    state.t.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect(),
                ),
                Reliability::Specificity => (
                    &state.eta[0],
                    &state.zeta0[0],
                    state.tau_eta[0],
                    state.t.iter().map(|&t| if t { 0.0 } else { 1.0 }).collect(),
                ),
            };
            // Joint conditional of the whole field: precision P = A + τ(D − ρW),
            // mean P⁻¹ A ζ.
            let car = car_matrix(&graph, hyper.rho(which));
            let mut p = Matrix::zeros(9, 9);
            for i in 0..9 {
                for j in 0..9 {
                    p[(i, j)] = tau * car[(i, j)];
                }
                p[(i, i)] += active[i];
            }
            let cov = p.inverse_spd("test").unwrap();
            let b: Vec<f64> = (0..9).map(|i| active[i] * zeta[i]).collect();
            let mu = cov.mul_vec(&b);
            for v in 0..9 {
                let rest: Vec<usize> = (0..9).filter(|&u| u != v).collect();
                let s_rr = submatrix(&cov, &rest, &rest).inverse_spd("test").unwrap();
                let s_vr = submatrix(&cov, &[v], &rest);
                let k = s_rr.transpose().mul_vec(s_vr.row(0));
                let dev: Vec<f64> = rest.iter().map(|&u| field[u] - mu[u]).collect();
                let mean = mu[v] + k.iter().zip(&dev).map(|(a, b)| a * b).sum::<f64>();
                let var = cov[(v, v)] - k.iter().zip(s_vr.row(0)).map(|(a, b)| a * b).sum::<f64>();
                let (m, s2) = spatial_conditional(which, 0, v, &state, &data, &graph, &hyper).unwrap();
                assert!((m - mean).abs() < 1e-10, "rep {rep} {which:?} v {v}: {m} vs {mean}");
                assert!((s2 - var).abs() < 1e-10, "rep {rep} {which:?} v {v}: {s2} vs {var}");
            }
        }
    }
}

#[test]
fn label_updates_match_enumerated_posterior() {
    let graph = LatticeGraph::new(2, 2).unwrap();
    let mut rng = Stream::seeded(5);
    let data = random_dataset(4, 2, &mut rng);
    let hyper = HyperConfig::for_dataset(&data);
    let mut state = random_state(&data, &mut rng);
    // Start sign-consistent so the first ζ redraw is well defined.
    for r in 0..2 {
        for v in 0..4 {
            let s1 = if data.labels[r][v] { 1.0 } else { -1.0 };
            state.zeta1[r][v] = s1 * state.zeta1[r][v].abs();
            state.zeta0[r][v] = -s1 * state.zeta0[r][v].abs();
        }
    }

    let mut exact = [0.0; 16];
    for (code, e) in exact.iter_mut().enumerate() {
        let mut s = state.clone();
        s.t = (0..4).map(|v| code >> v & 1 == 1).collect();
        *e = log_joint(&s, &data, &hyper, &graph).unwrap();
    }
    let max = exact.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = exact.iter().map(|l| (l - max).exp()).sum();
    let exact: Vec<f64> = exact.iter().map(|l| (l - max).exp() / z).collect();

    let config = SamplerConfig {
        n_iterations: 2,
        burn_in: 1,
        thin: 1,
        rng_seed: 3,
        kernels: KernelMask::labels_only(),
        ..Default::default()
    };
    let mut sampler = Sampler::new(&data, &graph, &hyper, config).unwrap().with_state(state).unwrap();
    let n = 200_000;
    let mut counts = [0usize; 16];
    for _ in 0..n {
        sampler.sweep().unwrap();
        let code = sampler.state().t.iter().enumerate().fold(0, |c, (v, &t)| c | (usize::from(t) << v));
        counts[code] += 1;
    }
    let tv: f64 = 0.5 * counts.iter().zip(&exact).map(|(&c, &p)| (c as f64 / n as f64 - p).abs()).sum::<f64>();
    assert!(tv < 0.01, "total variation {tv}");
}

type LogDensity = Box<dyn Fn(f64) -> f64>;

fn posterior_mean_by_quadrature(log_post: impl Fn(f64) -> f64) -> f64 {
    let (a, b, n) = (-25.0, 25.0, 40_000);
    let m = (0..=n).map(|i| log_post(a + (b - a) * i as f64 / n as f64)).fold(f64::NEG_INFINITY, f64::max);
    let z = simpson(|d| (log_post(d) - m).exp(), a, b, n);
    simpson(|d| d * (log_post(d) - m).exp(), a, b, n) / z
}

fn run_delta_chain(data: &FusionDataset, t: &[bool], hyper: &HyperConfig, steps: usize, seed: u64) -> (Vec<f64>, f64) {
    let mut delta = vec![0.0];
    let mut trace = Vec::with_capacity(steps);
    let mut acc = 0usize;
    for i in 0..steps {
        acc += usize::from(update_delta_gamerman(&mut delta, t, data, hyper, seed, i as u64 + 1).unwrap());
        trace.push(delta[0]);
    }
    (trace, acc as f64 / steps as f64)
}

#[test]
fn gamerman_intercept_mean_matches_quadrature() {
    let data = intercept_only(4);
    let t = [true, true, true, false];
    let cases: Vec<(HyperConfig, LogDensity)> = vec![
        (
            HyperConfig::for_dataset(&data),
            Box::new(|d: f64| -d * d / 8.0 + 3.0 * logistic(d).ln() + (1.0 - logistic(d)).ln()),
        ),
        (
            HyperConfig::for_dataset(&data).with_link(LinkFunction::Probit),
            Box::new(|d: f64| -d * d / 8.0 + 3.0 * phi_cdf(d).ln() + phi_cdf(-d).ln()),
        ),
        (
            // Beta(2, 3) on the intercept probability: density p^2 (1 − p)^3
            // in δ after the logistic Jacobian p(1 − p).
            HyperConfig::for_dataset(&data)
                .with_delta_prior(PriorDelta::Cmp(
                    CmpSpec::new(Matrix::from_row_major(1, 1, vec![1.0]).unwrap(), vec![(2.0, 3.0)]).unwrap(),
                ))
                .unwrap(),
            Box::new(|d: f64| 5.0 * logistic(d).ln() + 4.0 * (1.0 - logistic(d)).ln()),
        ),
    ];
    for (k, (hyper, log_post)) in cases.iter().enumerate() {
        let exact = posterior_mean_by_quadrature(log_post);
        let (trace, acc) = run_delta_chain(&data, &t, hyper, 200_000, 17 + k as u64);
        let mean = trace.iter().sum::<f64>() / trace.len() as f64;
        assert!((mean - exact).abs() < 0.02, "case {k}: chain {mean} vs quadrature {exact}");
        assert!(acc > 0.05 && acc <= 1.0, "case {k}: acceptance {acc}");
    }
}

#[test]
fn gamerman_histogram_matches_exact_posterior() {
    let data = intercept_only(3);
    let t = [true, false, true];
    let hyper = HyperConfig::for_dataset(&data);
    let log_post = |d: f64| -d * d / 8.0 + 2.0 * logistic(d).ln() + (1.0 - logistic(d)).ln();
    let (trace, _) = run_delta_chain(&data, &t, &hyper, 300_000, 99);

    let (lo, hi, bins) = (-4.0, 6.0, 20);
    let width = (hi - lo) / bins as f64;
    let z = simpson(|d| log_post(d).exp(), -30.0, 30.0, 60_000);
    for b in 0..bins {
        let (a, c) = (lo + b as f64 * width, lo + (b + 1) as f64 * width);
        let exact = simpson(|d| log_post(d).exp(), a, c, 200) / z;
        let got = trace.iter().filter(|&&d| d >= a && d < c).count() as f64 / trace.len() as f64;
        assert!((got - exact).abs() < 0.02, "bin {b}: {got} vs {exact}");
    }
}

#[test]
fn coefficient_conditional_matches_dense_gls() {
    let mut rng = Stream::seeded(8);
    let base = random_dataset(4, 1, &mut rng);
    let rand_mat = |rng: &mut Stream| Matrix::from_row_major(4, 2, (0..8).map(|_| rng.normal()).collect()).unwrap();
    let x = rand_mat(&mut rng);
    let zm = rand_mat(&mut rng);
    let data = base.with_reliability_covariates(vec![x.clone()], vec![zm.clone()]).unwrap();
    let sigma_b = Matrix::from_row_major(2, 2, vec![2.0, 0.3, 0.3, 0.5]).unwrap();
    let sigma_g = Matrix::from_row_major(2, 2, vec![1.0, -0.4, -0.4, 1.5]).unwrap();
    let hyper = HyperConfig::for_dataset(&data)
        .with_beta_prior(sigma_b.clone())
        .unwrap()
        .with_gamma_prior(sigma_g.clone())
        .unwrap();
    let inv2 = |m: &Matrix| {
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        Matrix::from_row_major(2, 2, vec![m[(1, 1)] / det, -m[(0, 1)] / det, -m[(1, 0)] / det, m[(0, 0)] / det])
            .unwrap()
    };
    for _ in 0..5 {
        let mut state = random_state(&data, &mut rng);
        state.beta = vec![vec![0.0; 2]];
        state.gamma = vec![vec![0.0; 2]];
        for (which, design, sigma, field, zeta) in [
            (Reliability::Sensitivity, &x, &sigma_b, &state.phi[0], &state.zeta1[0]),
            (Reliability::Specificity, &zm, &sigma_g, &state.eta[0], &state.zeta0[0]),
        ] {
            let active: Vec<bool> =
                state.t.iter().map(|&t| if which == Reliability::Sensitivity { t } else { !t }).collect();
            let mut prec = inv2(sigma);
            let mut rhs = [0.0; 2];
            for v in (0..4).filter(|&v| active[v]) {
                for i in 0..2 {
                    rhs[i] += design[(v, i)] * (zeta[v] - field[v]);
                    for j in 0..2 {
                        prec[(i, j)] += design[(v, i)] * design[(v, j)];
                    }
                }
            }
            let cov = inv2(&prec);
            let mean = cov.mul_vec(&rhs);
            let (chol, got_mean) = coefficient_conditional(which, 0, &state, &data, &hyper).unwrap().unwrap();
            let got_cov = chol.inverse();
            for i in 0..2 {
                assert!((got_mean[i] - mean[i]).abs() < 1e-10);
                for j in 0..2 {
                    assert!((got_cov[(i, j)] - cov[(i, j)]).abs() < 1e-10);
                }
            }
        }
    }
}

/// Fully normalised log joint written out term by term.
fn naive_log_joint(s: &ModelState, data: &FusionDataset, graph: &LatticeGraph, link: LinkFunction) -> f64 {
    let n = data.n_voxels();
    let mut total = 0.0;
    for r in 0..data.n_raters() {
        for v in 0..n {
            let y = data.labels[r][v];
            let p1 = if s.t[v] { phi_cdf(s.phi[r][v]) } else { 1.0 - phi_cdf(s.eta[r][v]) };
            total += if y { p1.ln() } else { (1.0 - p1).ln() };
        }
    }
    for v in 0..n {
        let u: f64 = (0..data.n_covariates()).map(|j| data.design[(v, j)] * s.delta[j]).sum();
        let p = match link {
            LinkFunction::Logistic => logistic(u),
            LinkFunction::Probit => phi_cdf(u),
        };
        total += if s.t[v] { p.ln() } else { (1.0 - p).ln() };
    }
    let j = s.delta.len() as f64;
    total += -0.5 * j * (2.0 * std::f64::consts::PI * 4.0).ln() - s.delta.iter().map(|d| d * d).sum::<f64>() / 8.0;
    let car = car_matrix(graph, 0.95);
    let ln_det = car.determinant().ln();
    for r in 0..data.n_raters() {
        for (field, tau) in [(&s.phi[r], s.tau_phi[r]), (&s.eta[r], s.tau_eta[r])] {
            let mut q = 0.0;
            for a in 0..n {
                for b in 0..n {
                    q += field[a] * car[(a, b)] * field[b];
                }
            }
            total += -0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() + 0.5 * (n as f64 * tau.ln() + ln_det)
                - 0.5 * tau * q;
            // Gamma(1, 2) density.
            total += 2f64.ln() - 2.0 * tau;
        }
    }
    total
}

#[test]
fn log_joint_matches_naive_sum() {
    let graph = LatticeGraph::new(2, 2).unwrap();
    let mut rng = Stream::seeded(21);
    let data = random_dataset(4, 1, &mut rng);
    for link in [LinkFunction::Logistic, LinkFunction::Probit] {
        let hyper = HyperConfig::for_dataset(&data).with_link(link);
        let base = random_state(&data, &mut rng);
        let base_lj = log_joint(&base, &data, &hyper, &graph).unwrap();
        let base_naive = naive_log_joint(&base, &data, &graph, link);
        for _ in 0..20 {
            let s = random_state(&data, &mut rng);
            let got = log_joint(&s, &data, &hyper, &graph).unwrap() - base_lj;
            let want = naive_log_joint(&s, &data, &graph, link) - base_naive;
            assert!((got - want).abs() < 1e-10, "{link:?}: {got} vs {want}");
        }
    }
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix.
fn jacobi_eigenvalues(m: &Matrix) -> Vec<f64> {
    let n = m.rows();
    let mut a = m.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)]).collect()
}

#[test]
fn car_precision_is_positive_definite_and_matches_dense() {
    let mut rng = Stream::seeded(4);
    for h in 1..=5 {
        for w in 1..=5 {
            if h * w == 1 {
                continue;
            }
            let graph = LatticeGraph::new(h, w).unwrap();
            for rho in [0.95, 0.5, 0.0, -0.9, 0.999] {
                let car = car_matrix(&graph, rho);
                let eig = jacobi_eigenvalues(&car);
                assert!(eig.iter().all(|&e| e > 0.0), "{h}x{w} rho {rho}: {eig:?}");
                let x: Vec<f64> = (0..graph.len()).map(|_| rng.normal()).collect();
                let dense = car.mul_vec(&x);
                let q_dense: f64 = dense.iter().zip(&x).map(|(a, b)| a * b).sum();
                assert!((graph.car_quadratic_form(&x, rho) - q_dense).abs() < 1e-10);
                for (a, b) in graph.car_precision_mul(&x, rho).iter().zip(&dense) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
            // Intrinsic limit: the constant vector is in the null space.
            let eig = jacobi_eigenvalues(&car_matrix(&graph, 1.0));
            assert!(eig.iter().cloned().fold(f64::INFINITY, f64::min).abs() < 1e-9);
        }
    }
}

#[test]
fn cmp_gradient_matches_finite_differences() {
    let mut rng = Stream::seeded(31);
    let design = Matrix::from_row_major(3, 3, vec![1.0, -1.5, 0.2, 1.0, 2.0, 0.9, 1.0, 0.3, 0.5]).unwrap();
    let spec = CmpSpec::new(design, vec![(20.0, 1.0), (1.0, 20.0), (2.0, 2.0)]).unwrap();
    let h = 1e-5;
    for link in [LinkFunction::Logistic, LinkFunction::Probit] {
        for _ in 0..10 {
            let d: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let g = cmp_log_prior_grad(&d, &spec, link);
            for j in 0..3 {
                let mut up = d.clone();
                let mut dn = d.clone();
                up[j] += h;
                dn[j] -= h;
                let fd = (cmp_log_prior(&up, &spec, link) - cmp_log_prior(&dn, &spec, link)) / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1.0), "{link:?} j {j}: {fd} vs {}", g[j]);
            }
        }
    }
}
