//! Unit-variance normal truncated to one half-line.

use crate::rng::RandomSource;
use crate::special::{norm_cdf, norm_isf, norm_pdf, norm_ppf, norm_sf};

const CF_SWITCH: f64 = 3.0;
const CF_DEPTH: usize = 200;
/// Standardized lower bounds at or above this use exponential rejection.
pub const TAIL_SWITCH: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Support z > 0.
    Positive,
    /// Support z ≤ 0.
    Negative,
}

/// h(t) = r(t) − t with r the inverse Mills ratio φ(t)/(1−Φ(t)).
pub fn mills_excess(t: f64) -> f64 {
    if t <= CF_SWITCH {
        return norm_pdf(t) / norm_sf(t) - t;
    }
    let mut f = t;
    for j in (2..CF_DEPTH).rev() {
        f = t + j as f64 / f;
    }
    1.0 / f
}

/// r(t) = φ(t)/(1−Φ(t)).
pub fn inverse_mills(t: f64) -> f64 {
    t + mills_excess(t)
}

fn positive_moments(xi: f64) -> (f64, f64) {
    let a = -xi;
    if a > CF_SWITCH {
        let h = mills_excess(a);
        (h, 1.0 - h * (a + h))
    } else {
        let r = inverse_mills(a);
        (xi + r, 1.0 + a * r - r * r)
    }
}

/// Mean and variance of Normal(ξ, 1) conditioned on the given side of zero.
pub fn trunc_normal_moments(xi: f64, side: Side) -> (f64, f64) {
    match side {
        Side::Positive => positive_moments(xi),
        Side::Negative => {
            let (m, v) = positive_moments(-xi);
            (-m, v)
        }
    }
}

/// Standard normal conditioned on T > a.
fn std_tail(a: f64, rng: &mut RandomSource) -> f64 {
    if a >= TAIL_SWITCH {
        let lam = 0.5 * (a + (a * a + 4.0).sqrt());
        loop {
            let t = a + rng.exp1() / lam;
            if rng.uniform() < (-0.5 * (t - lam).powi(2)).exp() {
                return t;
            }
        }
    }
    let u = rng.uniform_open();
    if a > 0.0 {
        norm_isf(norm_sf(a) * u).max(a)
    } else {
        let lo = norm_cdf(a);
        norm_ppf(lo + u * (1.0 - lo)).max(a)
    }
}

pub fn sample_trunc_normal(xi: f64, side: Side, rng: &mut RandomSource) -> f64 {
    match side {
        Side::Positive => (xi + std_tail(-xi, rng)).max(f64::MIN_POSITIVE),
        Side::Negative => (xi - std_tail(xi, rng)).min(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn half_normal_moments() {
        let (m, v) = trunc_normal_moments(0.0, Side::Positive);
        assert!((m - (2.0 / PI).sqrt()).abs() < 1e-14);
        assert!((v - (1.0 - 2.0 / PI)).abs() < 1e-14);
    }

    #[test]
    fn inactive_truncation() {
        let (m, v) = trunc_normal_moments(8.0, Side::Positive);
        assert!((m - 8.0).abs() < 1e-13 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reflection() {
        for xi in [-7.0, -1.3, 0.0, 0.4, 5.0, 30.0] {
            let (mp, vp) = trunc_normal_moments(-xi, Side::Positive);
            let (mn, vn) = trunc_normal_moments(xi, Side::Negative);
            assert_eq!(mn, -mp);
            assert_eq!(vn, vp);
        }
    }

    #[test]
    fn mills_excess_reference_values() {
        let table = [
            (1.0, 0.525_135_276_160_981_2),
            (2.5, 0.322_744_797_663_907_25),
            (3.0, 0.283_098_654_930_436_5),
            (5.0, 0.186_503_967_125_842_1),
            (8.0, 0.121_368_112_236_112_68),
        ];
        for (t, want) in table {
            let tol = if t > CF_SWITCH { 1e-13 } else { 1e-8 };
            assert!((mills_excess(t) - want).abs() < tol * want, "{t}");
        }
    }

    #[test]
    fn deep_tail_stable() {
        for xi in [-10.0, -20.0, -40.0] {
            let (m, v) = trunc_normal_moments(xi, Side::Positive);
            let a = -xi;
            assert!(m > 0.0 && m < 1.0 / a * 1.01 && m > 1.0 / (a + 1.0 / a) * 0.99);
            assert!(v > 0.0 && v < 1.5 / (a * a));
        }
    }

    #[test]
    fn samples_respect_support() {
        let mut rng = RandomSource::new(4, 0);
        for xi in [-12.0, -5.5, -0.2, 0.0, 3.0, 9.0] {
            for _ in 0..200 {
                assert!(sample_trunc_normal(xi, Side::Positive, &mut rng) > 0.0);
                assert!(sample_trunc_normal(xi, Side::Negative, &mut rng) <= 0.0);
            }
        }
    }

    #[test]
    fn sample_moments_match() {
        let mut rng = RandomSource::new(9, 2);
        let n = 40_000;
        for xi in [-7.0, -4.0, -1.0, 0.5, 2.0] {
            let xs: Vec<f64> = (0..n).map(|_| sample_trunc_normal(xi, Side::Positive, &mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let (m, v) = trunc_normal_moments(xi, Side::Positive);
            assert!((mean - m).abs() < 4.0 * (v / n as f64).sqrt(), "xi={xi} mean={mean} m={m}");
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((var - v).abs() < 0.05 * v, "xi={xi} var={var} v={v}");
        }
    }
}
