//! Truncated normal draws.

use crate::error::{invalid, Result};
use crate::math::{exp, normal_cdf, normal_quantile, sqrt};
use crate::rng::Stream;

/// Standardised bound beyond which the inverse CDF loses too much precision.
const TAIL_SWITCH: f64 = 5.0;

/// One draw from `N(mu, sigma²)` restricted to the open interval
/// `(lower, upper)`; either bound may be infinite.
pub fn sample_truncated_normal(mu: f64, sigma: f64, lower: f64, upper: f64, rng: &mut Stream) -> Result<f64> {
    if !(lower < upper) {
        return invalid(alloc::format!("truncation interval ({lower}, {upper}) is empty"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
        return invalid(alloc::format!("truncated normal needs finite mu and positive sigma, got ({mu}, {sigma})"));
    }
    let a = (lower - mu) / sigma;
    let b = (upper - mu) / sigma;
    let x = standard(a, b, rng);
    Ok((mu + sigma * x).clamp(lower.next_up(), upper.next_down()))
}

/// Draw from the standard normal restricted to `(a, b)`.
fn standard(a: f64, b: f64, rng: &mut Stream) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return rng.normal();
    }
    if a > TAIL_SWITCH {
        return upper_tail(a, b, rng);
    }
    if b < -TAIL_SWITCH {
        return -upper_tail(-b, -a, rng);
    }
    // Invert on whichever side keeps the CDF values away from 1.
    if a > 0.0 {
        let (pa, pb) = (normal_cdf(-a), normal_cdf(-b));
        let u = pb + rng.uniform() * (pa - pb);
        -normal_quantile(u)
    } else {
        let (pa, pb) = (normal_cdf(a), normal_cdf(b));
        let u = pa + rng.uniform() * (pb - pa);
        normal_quantile(u)
    }
}

/// `(a, b)` with `a > 0` far in the upper tail: exponential proposals
/// (Robert 1995), or uniform proposals when the interval is narrow.
fn upper_tail(a: f64, b: f64, rng: &mut Stream) -> f64 {
    if (b - a) * a < 1.0 {
        loop {
            let z = a + (b - a) * rng.uniform();
            if rng.uniform() <= exp(-0.5 * (z * z - a * a)) {
                return z;
            }
        }
    }
    let alpha = 0.5 * (a + sqrt(a * a + 4.0));
    loop {
        let z = a + rng.exponential() / alpha;
        if z >= b {
            continue;
        }
        let d = z - alpha;
        if rng.uniform() <= exp(-0.5 * d * d) {
            return z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn moments(n: usize, f: impl Fn(&mut Stream) -> f64) -> (f64, f64) {
        let mut s = Stream::seeded(99);
        let xs: alloc::vec::Vec<f64> = (0..n).map(|_| f(&mut s)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        (m, v)
    }

    #[test]
    fn half_normal_moments() {
        let (m, v) = moments(100_000, |s| {
            let x = sample_truncated_normal(0.0, 1.0, 0.0, f64::INFINITY, s).unwrap();
            assert!(x > 0.0);
            x
        });
        assert!((m - (2.0 / PI).sqrt()).abs() < 0.01);
        assert!((v - (1.0 - 2.0 / PI)).abs() < 0.01);
    }

    #[test]
    fn untruncated_moments() {
        let (m, v) =
            moments(100_000, |s| sample_truncated_normal(1.5, 2.0, f64::NEG_INFINITY, f64::INFINITY, s).unwrap());
        assert!((m - 1.5).abs() < 0.03);
        assert!((v - 4.0).abs() < 0.08);
    }

    #[test]
    fn far_tail_mean() {
        // E[X | X > a] = φ(a) / (1 − Φ(a)); about a + 1/a for large a.
        for &a in &[6.0, 12.0, 40.0] {
            let (m, _) = moments(20_000, |s| {
                let x = sample_truncated_normal(0.0, 1.0, a, f64::INFINITY, s).unwrap();
                assert!(x > a);
                x
            });
            // Continued fraction a + 1/(a + 2/(a + 3/(a + …))).
            let mut tail = a;
            for k in (1..60).rev() {
                tail = a + k as f64 / tail;
            }
            let mills = tail;
            assert!((m - mills).abs() < 0.01, "a={a} m={m} expected {mills}");
        }
        let (m, _) = moments(20_000, |s| sample_truncated_normal(0.0, 1.0, f64::NEG_INFINITY, -9.0, s).unwrap());
        assert!(m < -9.0 && m > -9.2);
    }

    #[test]
    fn narrow_intervals_stay_inside() {
        let mut s = Stream::seeded(5);
        for &(lo, hi) in &[(7.0, 7.01), (-3.0, -2.999), (0.0, 1e-9), (30.0, 30.5)] {
            for _ in 0..200 {
                let x = sample_truncated_normal(0.0, 1.0, lo, hi, &mut s).unwrap();
                assert!(x > lo && x < hi, "{x} not in ({lo}, {hi})");
            }
        }
    }

    #[test]
    fn shifted_mean_sign() {
        let mut s = Stream::seeded(6);
        for _ in 0..1000 {
            assert!(sample_truncated_normal(-50.0, 1.0, 0.0, f64::INFINITY, &mut s).unwrap() > 0.0);
            assert!(sample_truncated_normal(50.0, 1.0, f64::NEG_INFINITY, 0.0, &mut s).unwrap() < 0.0);
        }
    }

    #[test]
    fn empty_interval_is_error() {
        let mut s = Stream::seeded(1);
        assert!(sample_truncated_normal(0.0, 1.0, 1.0, 1.0, &mut s).is_err());
        assert!(sample_truncated_normal(0.0, 1.0, 2.0, 1.0, &mut s).is_err());
        assert!(sample_truncated_normal(0.0, 0.0, 0.0, 1.0, &mut s).is_err());
    }
}
