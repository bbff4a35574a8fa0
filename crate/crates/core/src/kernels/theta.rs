use std::f64::consts::PI;

use crate::error::{param, Error, Result};
use crate::rng::RandomSource;

const TAIL: f64 = 1e-16;
const TWO_PI: f64 = 2.0 * PI;
/// Rescaled variances at or above this use the theta series, below it the image sum.
const THETA_SWITCH: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(param(format!("interval [{lo}, {hi}) is empty or non-finite")));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.lo && y <= self.hi
    }

    pub fn wrap(&self, z: f64) -> f64 {
        let w = self.lo + (z - self.lo).rem_euclid(self.len());
        if w >= self.hi {
            self.lo
        } else {
            w
        }
    }

    fn scale(&self) -> f64 {
        TWO_PI / self.len()
    }
}

/// θ₃(z, q) = 1 + 2 Σ_{k≥1} q^{k²} cos(2kz).
pub fn jacobi_theta3(z: f64, q: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::DivergentSeries(q));
    }
    if q == 0.0 {
        return Ok(1.0);
    }
    let lq = q.ln();
    let mut sum = 1.0f64;
    let mut k = 1.0f64;
    loop {
        let mag = 2.0 * (k * k * lq).exp();
        if mag < TAIL * sum.abs() || mag == 0.0 {
            break;
        }
        sum += mag * (2.0 * k * z).cos();
        k += 1.0;
    }
    Ok(sum)
}

fn reduce(xi: f64) -> f64 {
    (xi + PI).rem_euclid(TWO_PI) - PI
}

/// Wrapped normal log-density on a circle of length 2π, theta form.
fn log_circle_theta(xi: f64, v: f64) -> Result<f64> {
    let th = jacobi_theta3(xi / 2.0, (-v / 2.0).exp())?;
    Ok(th.ln() - TWO_PI.ln())
}

/// Wrapped normal log-density on a circle of length 2π, sum over images.
fn log_circle_images(xi: f64, v: f64) -> f64 {
    let xi = reduce(xi);
    let lt = |k: f64| -(xi + TWO_PI * k).powi(2) / (2.0 * v);
    let top = lt(0.0);
    let mut s = 1.0;
    for dir in [1.0, -1.0] {
        let mut k = 1.0;
        loop {
            let t = (lt(dir * k) - top).exp();
            s += t;
            if t < TAIL * s {
                break;
            }
            k += 1.0;
        }
    }
    top + s.ln() - 0.5 * (TWO_PI * v).ln()
}

fn check(y: f64, v: f64, s: &Interval) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(param(format!("wrapped Gaussian variance must be positive, got {v}")));
    }
    if !s.contains(y) {
        return Err(param(format!("y = {y} outside [{}, {})", s.lo, s.hi)));
    }
    Ok(())
}

/// Log-density of the theta representation, on S with variance v in the units of S.
pub fn wrapped_gaussian_logdensity_theta(x: f64, y: f64, v: f64, s: &Interval) -> Result<f64> {
    check(y, v, s)?;
    let c = s.scale();
    Ok(c.ln() + log_circle_theta(reduce((y - x) * c), v * c * c)?)
}

/// Log-density of the image-sum representation.
pub fn wrapped_gaussian_logdensity_images(x: f64, y: f64, v: f64, s: &Interval) -> Result<f64> {
    check(y, v, s)?;
    let c = s.scale();
    Ok(c.ln() + log_circle_images((y - x) * c, v * c * c))
}

/// Log of the wrapped normal transition density from x to y on S.
pub fn wrapped_gaussian_logdensity(x: f64, y: f64, v: f64, s: &Interval) -> Result<f64> {
    check(y, v, s)?;
    let c = s.scale();
    let vc = v * c * c;
    if vc >= THETA_SWITCH {
        wrapped_gaussian_logdensity_theta(x, y, v, s)
    } else {
        Ok(c.ln() + log_circle_images((y - x) * c, vc))
    }
}

pub fn wrap_noise(x: f64, v: f64, s: &Interval, xi: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(param(format!("wrapped Gaussian variance must be positive, got {v}")));
    }
    Ok(s.wrap(x + v.sqrt() * xi))
}

pub fn wrapped_gaussian_sample(x: f64, v: f64, s: &Interval, rng: &mut RandomSource) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(param(format!("wrapped Gaussian variance must be positive, got {v}")));
    }
    let xi = rng.normal();
    wrap_noise(x, v, s, xi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_at_zero_nome() {
        for z in [-3.0, 0.0, 0.7, 10.0] {
            assert_eq!(jacobi_theta3(z, 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn theta_half_nome() {
        let direct: f64 = 1.0 + 2.0 * (1..40).map(|k| 0.5f64.powi(k * k)).sum::<f64>();
        let t = jacobi_theta3(0.0, 0.5).unwrap();
        assert!((t - direct).abs() < 1e-12);
        assert!((t - 2.128936).abs() < 1e-6);
    }

    #[test]
    fn theta_rejects_unit_nome() {
        assert!(matches!(jacobi_theta3(0.0, 1.0), Err(Error::DivergentSeries(_))));
        assert!(jacobi_theta3(0.0, -0.1).is_err());
    }

    #[test]
    fn theta_even() {
        for z in [0.1, 0.9, 2.5] {
            let a = jacobi_theta3(z, 0.3).unwrap();
            let b = jacobi_theta3(-z, 0.3).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn wrap_stays_inside() {
        let s = Interval::new(-1.0, 2.0).unwrap();
        for z in [-100.0, -1.0, 0.0, 2.0, 2.5, 1e6] {
            let w = s.wrap(z);
            assert!(w >= -1.0 && w < 2.0, "{z} -> {w}");
        }
    }

    #[test]
    fn density_rejects_outside_and_bad_variance() {
        let s = Interval::new(0.0, 1.0).unwrap();
        assert!(wrapped_gaussian_logdensity(0.5, 1.5, 0.1, &s).is_err());
        assert!(wrapped_gaussian_logdensity(0.5, 0.5, 0.0, &s).is_err());
        let mut rng = RandomSource::new(1, 0);
        assert!(wrapped_gaussian_sample(0.5, -1.0, &s, &mut rng).is_err());
    }
}
