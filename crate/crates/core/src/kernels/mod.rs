//! State vectors, kernel traits, shared-randomness coupling.

pub mod mh;
pub mod theta;

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::rng::RandomSource;

pub use mh::{
    accept_ratio, mh_step, DiscreteUniformProposal, IsotropicGaussian, MetropolisHastings, Proposal,
    WrappedGaussian,
};
pub use theta::{
    jacobi_theta3, wrapped_gaussian_logdensity, wrapped_gaussian_sample, Interval,
};

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("state vector".into()));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidState(format!("non-finite coordinate {c}")));
        }
        Ok(Self(coords))
    }

    pub fn scalar(x: f64) -> Self {
        Self(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn from_unchecked(coords: Vec<f64>) -> Self {
        Self(coords)
    }
}

impl Deref for StateVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub trait Kernel {
    fn step(&self, x: &StateVector, rng: &mut RandomSource) -> Result<StateVector>;

    fn target_log_density(&self, _x: &StateVector) -> Option<f64> {
        None
    }

    fn label(&self) -> &str;
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: StateVector,
    pub accepted: bool,
    pub alpha: f64,
}

/// A kernel whose randomness splits into standard normal proposal noise and one accept uniform.
/// Noise is always drawn before the uniform.
pub trait DecomposedKernel {
    fn noise_dim(&self, x: &StateVector) -> usize;

    fn step_with(&self, x: &StateVector, noise: &[f64], uniform: f64) -> Result<StepOutcome>;

    fn label(&self) -> &str;

    fn step_outcome(&self, x: &StateVector, rng: &mut RandomSource) -> Result<StepOutcome> {
        let noise = rng.normals(self.noise_dim(x));
        let u = rng.uniform();
        self.step_with(x, &noise, u)
    }
}

impl<T: DecomposedKernel> Kernel for T {
    fn step(&self, x: &StateVector, rng: &mut RandomSource) -> Result<StateVector> {
        Ok(self.step_outcome(x, rng)?.state)
    }

    fn label(&self) -> &str {
        DecomposedKernel::label(self)
    }
}

pub fn simulate_path<K: Kernel + ?Sized>(
    kernel: &K,
    x0: &StateVector,
    n: usize,
    rng: &mut RandomSource,
) -> Result<Vec<StateVector>> {
    let mut path = Vec::with_capacity(n + 1);
    path.push(x0.clone());
    for k in 0..n {
        let next = kernel.step(&path[k], rng)?;
        path.push(next);
    }
    Ok(path)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingRecord {
    pub alpha: f64,
    pub alpha_eps: f64,
    pub accepted: bool,
    pub accepted_eps: bool,
    pub distance: f64,
}

impl CouplingRecord {
    pub fn alpha_gap(&self) -> f64 {
        (self.alpha - self.alpha_eps).abs()
    }
}

/// One step of both kernels from `(x, x_eps)` using the same noise and the same uniform.
pub fn coupled_step<P, Q, D>(
    p: &P,
    p_eps: &Q,
    x: &StateVector,
    x_eps: &StateVector,
    dist: D,
    rng: &mut RandomSource,
) -> Result<((StateVector, StateVector), CouplingRecord)>
where
    P: DecomposedKernel + ?Sized,
    Q: DecomposedKernel + ?Sized,
    D: Fn(&StateVector, &StateVector) -> f64,
{
    let k = p.noise_dim(x);
    let k_eps = p_eps.noise_dim(x_eps);
    if k != k_eps {
        return Err(Error::IncompatibleKernels(format!(
            "{} draws {k} noise coordinates, {} draws {k_eps}",
            p.label(),
            p_eps.label()
        )));
    }
    let noise = rng.normals(k);
    let u = rng.uniform();
    let a = p.step_with(x, &noise, u)?;
    let b = p_eps.step_with(x_eps, &noise, u)?;
    let rec = CouplingRecord {
        alpha: a.alpha,
        alpha_eps: b.alpha,
        accepted: a.accepted,
        accepted_eps: b.accepted,
        distance: dist(&a.state, &b.state),
    };
    Ok(((a.state, b.state), rec))
}

pub fn euclidean(a: &StateVector, b: &StateVector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub struct FnKernel<F> {
    f: F,
    label: String,
}

impl<F> FnKernel<F>
where
    F: Fn(&StateVector, &mut RandomSource) -> Result<StateVector>,
{
    pub fn new(label: impl Into<String>, f: F) -> Self {
        Self { f, label: label.into() }
    }
}

impl<F> Kernel for FnKernel<F>
where
    F: Fn(&StateVector, &mut RandomSource) -> Result<StateVector>,
{
    fn step(&self, x: &StateVector, rng: &mut RandomSource) -> Result<StateVector> {
        (self.f)(x, rng)
    }

    fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Clone, Debug, Default)]
pub struct IdentityKernel;

impl DecomposedKernel for IdentityKernel {
    fn noise_dim(&self, _x: &StateVector) -> usize {
        0
    }

    fn step_with(&self, x: &StateVector, _noise: &[f64], _u: f64) -> Result<StepOutcome> {
        Ok(StepOutcome { state: x.clone(), accepted: true, alpha: 1.0 })
    }

    fn label(&self) -> &str {
        "identity"
    }
}

/// X' = ρX + c + σξ, coordinatewise.
#[derive(Clone, Debug)]
pub struct Ar1Kernel {
    pub rho: f64,
    pub shift: f64,
    pub sigma: f64,
    pub dim: usize,
}

impl Ar1Kernel {
    pub fn new(rho: f64, sigma: f64, dim: usize) -> Self {
        Self { rho, shift: 0.0, sigma, dim }
    }
}

impl DecomposedKernel for Ar1Kernel {
    fn noise_dim(&self, _x: &StateVector) -> usize {
        self.dim
    }

    fn step_with(&self, x: &StateVector, noise: &[f64], _u: f64) -> Result<StepOutcome> {
        if x.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x.dim() });
        }
        let y = x
            .iter()
            .zip(noise)
            .map(|(xi, e)| self.rho * xi + self.shift + self.sigma * e)
            .collect();
        Ok(StepOutcome { state: StateVector::from_unchecked(y), accepted: true, alpha: 1.0 })
    }

    fn label(&self) -> &str {
        "ar1"
    }
}
