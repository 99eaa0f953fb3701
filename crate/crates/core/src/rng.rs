//! Counter-based random streams.
//!
//! Every stochastic draw in the sampler comes from a [`Stream`] keyed by
//! `(seed, sweep, kernel, rater, index)`. A stream is SplitMix64 run from a
//! hashed key, so the `i`-th output is a pure function of the key and `i`.
//! Draws therefore do not depend on which worker performs them or in what
//! order voxels are visited.

use core::f64::consts::PI;

use crate::math::{log, normal_quantile, pow, sqrt};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Identifies the kernel (or other consumer) that owns a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    TrueLabels = 1,
    Zeta1 = 2,
    Zeta0 = 3,
    Phi = 4,
    Eta = 5,
    TauPhi = 6,
    TauEta = 7,
    Beta = 8,
    Gamma = 9,
    Delta = 10,
    /// Data regeneration in self-consistency harnesses.
    Regenerate = 11,
    Simulation = 12,
    /// Free-form streams for tests and tools.
    Auxiliary = 13,
}

/// Stream key: the full coordinate of one block of draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub sweep: u64,
    pub kind: StreamKind,
    pub rater: u64,
    pub index: u64,
}

impl StreamKey {
    pub fn new(seed: u64, sweep: u64, kind: StreamKind, rater: usize, index: usize) -> Self {
        Self { seed, sweep, kind, rater: rater as u64, index: index as u64 }
    }

    pub fn stream(self) -> Stream {
        Stream::from_key(self)
    }
}

/// SplitMix64 sequence started from a hashed key.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn from_key(key: StreamKey) -> Self {
        let mut h = mix64(key.seed ^ 0x6a09_e667_f3bc_c908);
        h = mix64(h ^ key.sweep.wrapping_mul(GOLDEN_GAMMA));
        h = mix64(h ^ (key.kind as u64).wrapping_mul(0xd1b5_4a32_d192_ed03));
        h = mix64(h ^ key.rater.wrapping_mul(0x8cb9_2ba7_2f3d_8dd7));
        h = mix64(h ^ key.index.wrapping_add(0x2545_f491_4f6c_dd1d));
        Self { state: h }
    }

    /// Convenience constructor for ad-hoc sequential use.
    pub fn seeded(seed: u64) -> Self {
        Self::from_key(StreamKey::new(seed, 0, StreamKind::Auxiliary, 0, 0))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal by inversion (one uniform per draw keeps streams aligned).
    #[inline]
    pub fn normal(&mut self) -> f64 {
        normal_quantile(self.uniform())
    }

    /// Bernoulli(p).
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Gamma(shape, rate) by Marsaglia–Tsang, with the `U^{1/a}` boost for
    /// shape below one.
    pub fn gamma(&mut self, shape: f64, rate: f64) -> f64 {
        debug_assert!(shape > 0.0 && rate > 0.0);
        if shape < 1.0 {
            let g = self.gamma(shape + 1.0, 1.0);
            return g * pow(self.uniform(), 1.0 / shape) / rate;
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / sqrt(9.0 * d);
        loop {
            let (x, v) = loop {
                let x = self.normal();
                let v = 1.0 + c * x;
                if v > 0.0 {
                    break (x, v * v * v);
                }
            };
            let u = self.uniform();
            if u < 1.0 - 0.0331 * x * x * x * x || log(u) < 0.5 * x * x + d * (1.0 - v + log(v)) {
                return d * v / rate;
            }
        }
    }

    /// Exponential(1).
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -log(self.uniform())
    }

    /// Box–Muller pair, for bulk noise where stream alignment is irrelevant.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let r = sqrt(-2.0 * log(self.uniform()));
        let t = 2.0 * PI * self.uniform();
        (r * libm::cos(t), r * libm::sin(t))
    }
}
