use crate::error::{param, Result};
use crate::kernels::theta::Interval;

/// Uniformly spaced support points with nearest-point snapping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    first: f64,
    h: f64,
    count: usize,
    /// Values farther than h/2 from every point are returned unchanged.
    pass_through: bool,
}

impl GridSpec {
    /// Cell midpoints of ⌈|S|/h⌉ equal cells partitioning S; the realized spacing is at most `h`.
    pub fn covering(s: &Interval, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(param(format!("grid spacing must be positive, got {h}")));
        }
        let count = (s.len() / h).ceil().max(1.0) as usize;
        let hh = s.len() / count as f64;
        Ok(Self { first: s.lo + 0.5 * hh, h: hh, count, pass_through: false })
    }

    /// Points center + kh for |kh| ≤ half_width; outside the covered cells values pass through.
    pub fn window(center: f64, half_width: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite() && half_width >= 0.0 && half_width.is_finite()) {
            return Err(param(format!("bad window grid: half width {half_width}, spacing {h}")));
        }
        let k = (half_width / h).floor() as usize;
        Ok(Self { first: center - k as f64 * h, h, count: 2 * k + 1, pass_through: true })
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn max_snap_error(&self) -> f64 {
        0.5 * self.h
    }

    pub fn point(&self, k: usize) -> f64 {
        self.first + k as f64 * self.h
    }

    /// Nearest support point and its index, or `(None, y)` for pass-through values.
    pub fn snap(&self, y: f64) -> (Option<usize>, f64) {
        let raw = ((y - self.first) / self.h).round();
        if self.pass_through && (raw < 0.0 || raw > (self.count - 1) as f64) {
            return (None, y);
        }
        let k = raw.clamp(0.0, (self.count - 1) as f64) as usize;
        (Some(k), self.point(k))
    }

    /// Index of a support point equal to `x` up to rounding.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        match self.snap(x) {
            (Some(k), p) if (p - x).abs() <= 1e-9 * self.h => Some(k),
            _ => None,
        }
    }
}
