use nalgebra::DMatrix;

use super::{stationary_exact, ChainMetric, FiniteChain, MAX_ATOMS};
use crate::error::{param, Error, Result};
use crate::metrics::MetricKind;
use crate::rng::RandomSource;
use crate::stats::Estimate;

/// Gaussian autoregression restricted to an evenly spaced centred grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Ar1Config {
    pub states: usize,
    pub spacing: f64,
    pub rho: f64,
    pub sigma: f64,
    /// Mean shift of the perturbed kernel.
    pub shift: f64,
    pub delta_scale: f64,
}

impl Default for Ar1Config {
    fn default() -> Self {
        Self { states: 11, spacing: 0.5, rho: 0.5, sigma: 1.0, shift: 0.1, delta_scale: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct Ar1Pair {
    pub exact: FiniteChain,
    pub perturbed: FiniteChain,
    pub delta_scale: f64,
    /// Exact capped-W1 contraction factor of the exact kernel.
    pub alpha_bar: f64,
    /// max_x of the capped-W1 distance between the two kernels at x.
    pub eps: f64,
    /// φ(x) = 1 ∧ |x − x_min|/δ, a 1-Lipschitz function for the capped metric.
    pub phi: Vec<f64>,
    pub mu_phi: f64,
}

/// P(i, j) ∝ exp(−(x_j − ρx_i − c)²/(2σ²)).
pub fn discrete_ar1(states: usize, spacing: f64, rho: f64, sigma: f64, shift: f64) -> Result<FiniteChain> {
    if states < 2 || !(spacing > 0.0) || !(sigma > 0.0) {
        return Err(param("need at least two states, positive spacing and positive sigma"));
    }
    let c = 0.5 * (states - 1) as f64;
    let xs: Vec<f64> = (0..states).map(|j| (j as f64 - c) * spacing).collect();
    let mut p = DMatrix::zeros(states, states);
    for i in 0..states {
        let m = rho * xs[i] + shift;
        let w: Vec<f64> = xs.iter().map(|x| (-(x - m).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
        let s: f64 = w.iter().sum();
        for j in 0..states {
            p[(i, j)] = w[j] / s;
        }
    }
    FiniteChain::new(xs, p, None)
}

pub fn ar1_pair(config: &Ar1Config) -> Result<Ar1Pair> {
    if config.states > MAX_ATOMS {
        return Err(Error::SizeLimit(format!("{} states exceeds {MAX_ATOMS}", config.states)));
    }
    let exact = discrete_ar1(config.states, config.spacing, config.rho, config.sigma, 0.0)?;
    let perturbed = discrete_ar1(config.states, config.spacing, config.rho, config.sigma, config.shift)?;
    let metric = ChainMetric::new(MetricKind::CappedW1, 0.0, config.delta_scale);
    let zeros = vec![0.0; config.states];
    let alpha_bar = super::contraction_with(&exact, metric, &zeros)?;
    let mut eps: f64 = 0.0;
    for i in 0..config.states {
        eps = eps.max(metric.distance(&exact.states, &zeros, &exact.row(i), &perturbed.row(i))?);
    }
    let x0 = exact.states[0];
    let phi: Vec<f64> = exact.states.iter().map(|x| ((x - x0).abs() / config.delta_scale).min(1.0)).collect();
    let pi = stationary_exact(&exact)?;
    let mu_phi = pi.iter().zip(&phi).map(|(a, b)| a * b).sum();
    Ok(Ar1Pair { exact, perturbed, delta_scale: config.delta_scale, alpha_bar, eps, phi, mu_phi })
}

impl Ar1Pair {
    /// E[(1/n)Σ_{k<n} φ(X_k)] − μφ for the perturbed chain started at `start`.
    pub fn exact_bias(&self, start: usize, n: usize) -> Result<f64> {
        if n == 0 || start >= self.exact.len() {
            return Err(param("need n ≥ 1 and a valid start state"));
        }
        let mut mu = self.perturbed.dirac(start);
        let mut s = 0.0;
        for _ in 0..n {
            s += mu.iter().zip(&self.phi).map(|(a, b)| a * b).sum::<f64>();
            mu = self.perturbed.push(&mu);
        }
        Ok(s / n as f64 - self.mu_phi)
    }

    /// Monte Carlo estimate of the same bias from independent perturbed chains.
    pub fn simulated_bias(&self, start: usize, n: usize, reps: usize, rng: &mut RandomSource) -> Result<Estimate> {
        if n == 0 || reps < 2 || start >= self.exact.len() {
            return Err(param("need n ≥ 1, reps ≥ 2 and a valid start state"));
        }
        let k = self.perturbed.len();
        let cdf: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                self.perturbed
                    .row(i)
                    .iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        let avgs: Vec<f64> = (0..reps)
            .map(|_| {
                let mut x = start;
                let mut s = 0.0;
                for _ in 0..n {
                    s += self.phi[x];
                    let u = rng.uniform() * cdf[x][k - 1];
                    x = cdf[x].partition_point(|&c| c <= u).min(k - 1);
                }
                s / n as f64 - self.mu_phi
            })
            .collect();
        Ok(Estimate::from_samples(&avgs))
    }
}
