/// A Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, n };
        }
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0) } else { 0.0 };
        Self { mean, se: (var / nf).sqrt(), n }
    }

    /// Standard error from non-overlapping batch means, for autocorrelated series.
    pub fn batch_means(xs: &[f64], batches: usize) -> Self {
        let n = xs.len();
        let b = batches.max(2).min(n.max(2));
        let size = n / b;
        if size == 0 {
            return Self::from_samples(xs);
        }
        let means: Vec<f64> = (0..b).map(|i| xs[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64).collect();
        let m = Self::from_samples(&means);
        Self { mean: xs.iter().sum::<f64>() / n as f64, se: m.se, n }
    }

    pub fn upper(&self, z: f64) -> f64 {
        self.mean + z * self.se
    }
}
