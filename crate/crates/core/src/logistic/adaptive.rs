use nalgebra::{Cholesky, DMatrix, DVector};

use super::{log_target, LogisticData};
use crate::error::{param, Error, Result};
use crate::kernels::mh::accept_from_log_ratio;
use crate::rng::RandomSource;

pub const HAARIO_LAMBDA: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
pub struct AdaptiveConfig {
    pub burn_in_fraction: f64,
    pub lambda: f64,
    /// Adaptation starts at step `adapt_factor · p`.
    pub adapt_factor: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self { burn_in_fraction: 0.2, lambda: HAARIO_LAMBDA, adapt_factor: 2 }
    }
}

#[derive(Clone, Debug)]
pub struct AdaptiveRun {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub path: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    /// Final proposal covariance (2.38²/p)(Σ + λI).
    pub proposal_cov: DMatrix<f64>,
    /// Set when the running covariance had an eigenvalue at or below λ at some adaptation step.
    pub regularized: bool,
    pub burn_in: usize,
}

struct Welford {
    n: usize,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl Welford {
    fn new(p: usize) -> Self {
        Self { n: 0, mean: DVector::zeros(p), m2: DMatrix::zeros(p, p) }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let x = DVector::from_column_slice(x);
        let d = &x - &self.mean;
        self.mean += &d / self.n as f64;
        let d2 = &x - &self.mean;
        self.m2 += &d * d2.transpose();
    }

    fn cov(&self) -> DMatrix<f64> {
        let c = &self.m2 / (self.n.max(2) - 1) as f64;
        (&c + c.transpose()) * 0.5
    }
}

/// Full-data random-walk Metropolis with running-covariance adaptation.
pub fn adaptive_rwm_with<F>(
    log_target: F,
    n: usize,
    x0: &[f64],
    init_cov: &DMatrix<f64>,
    config: AdaptiveConfig,
    rng: &mut RandomSource,
) -> Result<AdaptiveRun>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let p = x0.len();
    if p == 0 {
        return Err(Error::Empty("initial state".into()));
    }
    if init_cov.shape() != (p, p) {
        return Err(Error::Dimension { expected: p, got: init_cov.nrows() });
    }
    if !(0.0..1.0).contains(&config.burn_in_fraction) {
        return Err(param(format!("burn-in fraction {} outside [0,1)", config.burn_in_fraction)));
    }
    let adapt_start = config.adapt_factor * p;
    let burn_in = ((n as f64) * config.burn_in_fraction).floor() as usize;
    if n <= burn_in.max(adapt_start) + 1 {
        return Err(param(format!("chain length {n} does not exceed burn-in {burn_in} and adaptation start {adapt_start}")));
    }
    let scale = 2.38f64.powi(2) / p as f64;
    let mut chol = Cholesky::new(init_cov.clone())
        .ok_or_else(|| Error::LinearAlgebra("initial proposal covariance is not positive definite".into()))?;
    let mut proposal_cov = init_cov.clone();
    let mut regularized = false;

    let mut x = x0.to_vec();
    let mut lx = log_target(&x)?;
    if !lx.is_finite() {
        return Err(Error::InvalidState("log target is not finite at the initial state".into()));
    }
    let mut running = Welford::new(p);
    let mut kept = Welford::new(p);
    let mut path = Vec::with_capacity(n);
    let mut accepted = 0usize;
    let mut proposed_after = 0usize;

    for t in 0..n {
        if t >= adapt_start && t > 1 {
            let s = running.cov();
            let cand = (&s + DMatrix::identity(p, p) * config.lambda) * scale;
            if s.clone().symmetric_eigenvalues().min() <= config.lambda {
                regularized = true;
            }
            match Cholesky::new(cand.clone()) {
                Some(c) => {
                    chol = c;
                    proposal_cov = cand;
                }
                None => regularized = true,
            }
        }
        let z = DVector::from_vec(rng.normals(p));
        let step = chol.l() * z;
        let y: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let ly = log_target(&y)?;
        let alpha = if ly.is_finite() { accept_from_log_ratio(ly - lx) } else { 0.0 };
        let u = rng.uniform();
        if t >= adapt_start {
            proposed_after += 1;
        }
        if u < alpha {
            x = y;
            lx = ly;
            if t >= adapt_start {
                accepted += 1;
            }
        }
        running.push(&x);
        if t >= burn_in {
            kept.push(&x);
        }
        path.push(x.clone());
    }
    let cov = kept.cov();
    Ok(AdaptiveRun {
        mean: kept.mean.clone(),
        cov,
        path,
        acceptance_rate: accepted as f64 / proposed_after.max(1) as f64,
        proposal_cov,
        regularized,
        burn_in,
    })
}

/// Initial proposal (0.1²/p)(W′W/4 + B⁻¹)⁻¹, then [`adaptive_rwm_with`] on the full-data target.
pub fn adaptive_rwm(data: &LogisticData, n: usize, x0: &[f64], rng: &mut RandomSource) -> Result<AdaptiveRun> {
    let p = data.dim();
    let h = Cholesky::new(data.curvature_bound())
        .ok_or_else(|| Error::LinearAlgebra("curvature bound is not positive definite".into()))?;
    let init = h.inverse() * (0.01 / p as f64);
    adaptive_rwm_with(|x| log_target(data, x), n, x0, &init, AdaptiveConfig::default(), rng)
}
