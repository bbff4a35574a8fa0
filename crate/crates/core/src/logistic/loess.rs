use crate::error::{param, Error, Result};

pub const MIN_POINTS: usize = 10;

/// Tricube-weighted local linear smoother.
#[derive(Clone, Debug)]
pub struct Loess {
    xs: Vec<f64>,
    ys: Vec<f64>,
    q: usize,
}

pub fn loess_fit(xs: &[f64], ys: &[f64], span: f64) -> Result<Loess> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < MIN_POINTS {
        return Err(param(format!("need at least {MIN_POINTS} points, got {}", xs.len())));
    }
    if !(span > 0.0 && span <= 1.0) {
        return Err(param(format!("span {span} outside (0,1]")));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("loess input".into()));
    }
    let q = ((span * xs.len() as f64).ceil() as usize).clamp(3, xs.len());
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    Ok(Loess { xs: idx.iter().map(|&i| xs[i]).collect(), ys: idx.iter().map(|&i| ys[i]).collect(), q })
}

impl Loess {
    pub fn neighbours(&self) -> usize {
        self.q
    }

    pub fn eval(&self, x0: f64) -> f64 {
        let n = self.xs.len();
        // Window of q nearest points in sorted order.
        let mut lo = self.xs.partition_point(|&v| v < x0).saturating_sub(self.q).min(n - self.q);
        while lo + self.q < n && (x0 - self.xs[lo]) > (self.xs[lo + self.q] - x0) {
            lo += 1;
        }
        let win = lo..lo + self.q;
        let h = win.clone().map(|i| (self.xs[i] - x0).abs()).fold(0.0, f64::max);
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in win.clone() {
            let d = self.xs[i] - x0;
            let w = if h > 0.0 {
                let r = (d.abs() / (h * (1.0 + 1e-12))).min(1.0);
                (1.0 - r * r * r).powi(3)
            } else {
                1.0
            };
            s0 += w;
            s1 += w * d;
            s2 += w * d * d;
            t0 += w * self.ys[i];
            t1 += w * d * self.ys[i];
        }
        let det = s0 * s2 - s1 * s1;
        if s0 <= 0.0 {
            return win.map(|i| self.ys[i]).sum::<f64>() / self.q as f64;
        }
        if det.abs() <= 1e-12 * s0 * s2.max(f64::MIN_POSITIVE) {
            return t0 / s0;
        }
        (s2 * t0 - s1 * t1) / det
    }

    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSource;

    #[test]
    fn constant() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.37).collect();
        let f = loess_fit(&xs, &vec![2.5; 30], 0.4).unwrap();
        for x in [0.1, 3.0, 9.0] {
            assert!((f.eval(x) - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn line_exact() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.77).sin() * 5.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let f = loess_fit(&xs, &ys, 0.3).unwrap();
        for x in [-3.0, 0.0, 1.7, 4.0] {
            assert!((f.eval(x) - (2.0 * x + 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn noisy_sine() {
        let mut rng = RandomSource::new(5, 0);
        let n = 400;
        let sd = 0.3;
        let xs: Vec<f64> = (0..n).map(|_| rng.uniform() * 6.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin() + sd * rng.normal()).collect();
        let f = loess_fit(&xs, &ys, 0.3).unwrap();
        let grid: Vec<f64> = (1..60).map(|i| i as f64 * 0.1).collect();
        let mse = grid.iter().map(|&x| (f.eval(x) - x.sin()).powi(2)).sum::<f64>() / grid.len() as f64;
        assert!(mse.sqrt() < sd);
    }

    #[test]
    fn rejects() {
        assert!(loess_fit(&[1.0; 5], &[1.0; 5], 0.5).is_err());
        assert!(loess_fit(&[1.0; 20], &[1.0; 20], 0.0).is_err());
        assert!(loess_fit(&[1.0; 20], &[1.0; 19], 0.5).is_err());
    }
}
