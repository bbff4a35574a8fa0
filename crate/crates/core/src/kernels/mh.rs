use crate::error::{Error, Result};
use crate::kernels::theta::{self, Interval};
use crate::kernels::{DecomposedKernel, StateVector, StepOutcome};
use crate::rng::RandomSource;
use crate::special::norm_cdf;

/// A proposal Q(x, ·) generated from standard normal noise.
pub trait Proposal {
    fn noise_dim(&self, x: &[f64]) -> usize;

    fn propose(&self, x: &[f64], noise: &[f64]) -> Result<Vec<f64>>;

    /// log q(x, y).
    fn log_density(&self, x: &[f64], y: &[f64]) -> Result<f64>;

    fn symmetric(&self) -> bool {
        false
    }

    fn sample(&self, x: &[f64], rng: &mut RandomSource) -> Result<Vec<f64>> {
        let noise = rng.normals(self.noise_dim(x));
        self.propose(x, &noise)
    }
}

/// 1 ∧ e^r with r = −∞ or NaN mapped to 0.
pub fn accept_from_log_ratio(r: f64) -> f64 {
    if r.is_nan() {
        0.0
    } else if r >= 0.0 {
        1.0
    } else {
        r.exp()
    }
}

pub fn accept_ratio<T, Q>(log_target: &T, proposal: &Q, x: &[f64], y: &[f64]) -> Result<f64>
where
    T: Fn(&[f64]) -> f64 + ?Sized,
    Q: Proposal + ?Sized,
{
    let lx = log_target(x);
    if !lx.is_finite() {
        return Err(Error::InvalidState(format!("log target {lx} at current state")));
    }
    let ly = log_target(y);
    let mut r = ly - lx;
    if !proposal.symmetric() {
        let back = proposal.log_density(y, x)?;
        let fwd = proposal.log_density(x, y)?;
        r += back - fwd;
    }
    Ok(accept_from_log_ratio(r))
}

pub fn mh_step<T, Q>(
    log_target: &T,
    proposal: &Q,
    x: &StateVector,
    rng: &mut RandomSource,
) -> Result<(StateVector, bool, f64)>
where
    T: Fn(&[f64]) -> f64 + ?Sized,
    Q: Proposal + ?Sized,
{
    let noise = rng.normals(proposal.noise_dim(x));
    let u = rng.uniform();
    let o = mh_step_with(log_target, proposal, x, &noise, u)?;
    Ok((o.state, o.accepted, o.alpha))
}

fn mh_step_with<T, Q>(log_target: &T, proposal: &Q, x: &StateVector, noise: &[f64], u: f64) -> Result<StepOutcome>
where
    T: Fn(&[f64]) -> f64 + ?Sized,
    Q: Proposal + ?Sized,
{
    let y = proposal.propose(x, noise)?;
    let alpha = accept_ratio(log_target, proposal, x, &y)?;
    if u < alpha {
        Ok(StepOutcome { state: StateVector::new(y)?, accepted: true, alpha })
    } else {
        Ok(StepOutcome { state: x.clone(), accepted: false, alpha })
    }
}

pub struct MetropolisHastings<T, Q> {
    pub log_target: T,
    pub proposal: Q,
    label: String,
}

impl<T, Q> MetropolisHastings<T, Q>
where
    T: Fn(&[f64]) -> f64,
    Q: Proposal,
{
    pub fn new(label: impl Into<String>, log_target: T, proposal: Q) -> Self {
        Self { log_target, proposal, label: label.into() }
    }
}

impl<T, Q> DecomposedKernel for MetropolisHastings<T, Q>
where
    T: Fn(&[f64]) -> f64,
    Q: Proposal,
{
    fn noise_dim(&self, x: &StateVector) -> usize {
        self.proposal.noise_dim(x)
    }

    fn step_with(&self, x: &StateVector, noise: &[f64], uniform: f64) -> Result<StepOutcome> {
        mh_step_with(&self.log_target, &self.proposal, x, noise, uniform)
    }

    fn label(&self) -> &str {
        &self.label
    }
}

/// y = x + τξ.
#[derive(Clone, Debug)]
pub struct IsotropicGaussian {
    pub tau2: f64,
}

impl IsotropicGaussian {
    pub fn new(tau2: f64) -> Result<Self> {
        if !(tau2 > 0.0 && tau2.is_finite()) {
            return Err(crate::error::param(format!("proposal variance must be positive, got {tau2}")));
        }
        Ok(Self { tau2 })
    }
}

impl Proposal for IsotropicGaussian {
    fn noise_dim(&self, x: &[f64]) -> usize {
        x.len()
    }

    fn propose(&self, x: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
        let t = self.tau2.sqrt();
        Ok(x.iter().zip(noise).map(|(a, e)| a + t * e).collect())
    }

    fn log_density(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let p = x.len() as f64;
        let ss: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        Ok(-0.5 * ss / self.tau2 - 0.5 * p * (2.0 * std::f64::consts::PI * self.tau2).ln())
    }

    fn symmetric(&self) -> bool {
        true
    }
}

/// Normal(x, v) wrapped onto an interval.
#[derive(Clone, Debug)]
pub struct WrappedGaussian {
    pub v: f64,
    pub interval: Interval,
}

impl WrappedGaussian {
    pub fn new(v: f64, interval: Interval) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(crate::error::param(format!("wrapped Gaussian variance must be positive, got {v}")));
        }
        Ok(Self { v, interval })
    }
}

impl Proposal for WrappedGaussian {
    fn noise_dim(&self, _x: &[f64]) -> usize {
        1
    }

    fn propose(&self, x: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![theta::wrap_noise(x[0], self.v, &self.interval, noise[0])?])
    }

    fn log_density(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        theta::wrapped_gaussian_logdensity(x[0], y[0], self.v, &self.interval)
    }

    fn symmetric(&self) -> bool {
        true
    }
}

/// Uniform proposal over the integer states {0, …, n−1}, driven by Φ(ξ).
#[derive(Clone, Debug)]
pub struct DiscreteUniformProposal {
    pub n: usize,
}

impl Proposal for DiscreteUniformProposal {
    fn noise_dim(&self, _x: &[f64]) -> usize {
        1
    }

    fn propose(&self, _x: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
        let k = ((self.n as f64) * norm_cdf(noise[0])).floor().min(self.n as f64 - 1.0);
        Ok(vec![k])
    }

    fn log_density(&self, _x: &[f64], _y: &[f64]) -> Result<f64> {
        Ok(-(self.n as f64).ln())
    }

    fn symmetric(&self) -> bool {
        true
    }
}
