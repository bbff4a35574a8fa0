//! Gaussian-process marginal-likelihood targets on a bounded interval and on the line.

mod bounded;
mod experiment;
mod grid;
mod pcn;
mod spectral;

use nalgebra::{DMatrix, DVector};

use crate::error::{param, Error, Result};
use crate::kernels::theta::Interval;
use crate::rng::RandomSource;

pub use bounded::{
    adaptive_rank, bounded_log_target, discretized_mh_step, gp_log_marginal, gp_log_marginal_dense, gp_theory_constants,
    low_rank_accept, low_rank_log_marginal, snap_coupling_w1, DiscretizedStep, TheoryConstants,
};
pub use experiment::{run_bounded, run_bounded_on, run_pcn, run_pcn_on, BoundedConfig, BoundedReport, PcnConfig, PcnProbe, PcnReport};
pub use grid::GridSpec;
pub use pcn::{
    coupled_pcn_approx_step, discrete_lyapunov_check, pcn_drift_certificate, pcn_error_budget, pcn_step, phi_derivative,
    potential_phi, potential_phi_rank, exp_lyapunov, CoupledPcnRecord, LyapunovCheckConfig, LyapunovCheckReport, LyapunovProbe, PcnErrorBudget,
    PcnStep, PhiTable,
};
pub use spectral::{decompose, SpectralCache, Spectrum, CACHE_MAGIC, EIGEN_RESIDUAL_TOL};

/// How the range parameter enters the squared-exponential kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    /// log Σ_ij = −x‖w_i − w_j‖².
    Linear,
    /// log Σ_ij = −x²‖w_i − w_j‖².
    Squared,
}

impl Convention {
    fn rate(self, x: f64) -> f64 {
        match self {
            Self::Linear => x,
            Self::Squared => x * x,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GPData {
    locations: Vec<Vec<f64>>,
    z: DVector<f64>,
    sq_dist: DMatrix<f64>,
    pub a: f64,
    pub b: f64,
    pub interval: Interval,
    /// pCN autocorrelation.
    pub theta: f64,
    /// Wrapped proposal variance.
    pub v: f64,
    pub convention: Convention,
}

impl GPData {
    /// Defaults: a = b = 1, S = [0.1, 0.1 + 2π), θ = 0.5, v = 1, linear convention.
    pub fn new(locations: Vec<Vec<f64>>, z: Vec<f64>) -> Result<Self> {
        let n = locations.len();
        if n == 0 {
            return Err(Error::Empty("locations".into()));
        }
        if z.len() != n {
            return Err(Error::Dimension { expected: n, got: z.len() });
        }
        let d = locations[0].len();
        if d == 0 {
            return Err(param("locations need at least one coordinate"));
        }
        if let Some(bad) = locations.iter().find(|l| l.len() != d) {
            return Err(Error::Dimension { expected: d, got: bad.len() });
        }
        if locations.iter().flatten().chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("locations or observations".into()));
        }
        let sq_dist = DMatrix::from_fn(n, n, |i, j| {
            locations[i].iter().zip(&locations[j]).map(|(a, b)| (a - b).powi(2)).sum()
        });
        Ok(Self {
            locations,
            z: DVector::from_vec(z),
            sq_dist,
            a: 1.0,
            b: 1.0,
            interval: Interval::new(0.1, 0.1 + 2.0 * std::f64::consts::PI)?,
            theta: 0.5,
            v: 1.0,
            convention: Convention::Linear,
        })
    }

    pub fn with_prior(mut self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(param(format!("prior shape and rate must be positive, got a = {a}, b = {b}")));
        }
        self.a = a;
        self.b = b;
        Ok(self)
    }

    pub fn with_interval(mut self, interval: Interval) -> Self {
        self.interval = interval;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        if !(theta > -1.0 && theta <= 1.0) {
            return Err(param(format!("pCN autocorrelation must lie in (-1, 1], got {theta}")));
        }
        self.theta = theta;
        Ok(self)
    }

    pub fn with_proposal_var(mut self, v: f64) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(param(format!("proposal variance must be positive, got {v}")));
        }
        self.v = v;
        Ok(self)
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn z(&self) -> &DVector<f64> {
        &self.z
    }

    pub fn locations(&self) -> &[Vec<f64>] {
        &self.locations
    }

    pub fn sq_dist(&self) -> &DMatrix<f64> {
        &self.sq_dist
    }

    pub fn kernel_matrix(&self, x: f64) -> DMatrix<f64> {
        kernel_from_sq_dist(x, &self.sq_dist, self.convention)
    }

    /// Σ under the squared convention regardless of the configured one.
    pub fn kernel_matrix_squared(&self, x: f64) -> DMatrix<f64> {
        kernel_from_sq_dist(x, &self.sq_dist, Convention::Squared)
    }
}

fn kernel_from_sq_dist(x: f64, sq: &DMatrix<f64>, convention: Convention) -> DMatrix<f64> {
    let r = convention.rate(x);
    let mut m = sq.map(|d| if d == 0.0 { 1.0 } else { (-r * d).exp() });
    m.fill_diagonal(1.0);
    m
}

pub fn sqexp_kernel_matrix(x: f64, locations: &[Vec<f64>], convention: Convention) -> DMatrix<f64> {
    let n = locations.len();
    let sq = DMatrix::from_fn(n, n, |i, j| locations[i].iter().zip(&locations[j]).map(|(a, b)| (a - b).powi(2)).sum());
    kernel_from_sq_dist(x, &sq, convention)
}

/// Uniform locations on [0, spread]^dim and z drawn from N(0, I + Σ(x_true)) under the given convention.
pub fn synthetic_gp(n: usize, dim: usize, spread: f64, x_true: f64, convention: Convention, seed: u64) -> Result<GPData> {
    if n == 0 || dim == 0 {
        return Err(param("need at least one location and one coordinate"));
    }
    let mut rng = RandomSource::new(seed, 0);
    let locs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| spread * rng.uniform()).collect()).collect();
    let m = sqexp_kernel_matrix(x_true, &locs, convention) + DMatrix::identity(n, n);
    let l = nalgebra::Cholesky::new(m).ok_or_else(|| Error::LinearAlgebra("I + Σ not positive definite".into()))?;
    let z = l.l() * DVector::from_vec(rng.normals(n));
    Ok(GPData::new(locs, z.iter().copied().collect())?.with_convention(convention))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn locs() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![0.2, 2.0], vec![3.0, 1.0]]
    }

    #[test]
    fn zero_range_all_ones() {
        let k = sqexp_kernel_matrix(0.0, &locs(), Convention::Linear);
        assert!(k.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn large_range_identity() {
        let k = sqexp_kernel_matrix(1e4, &locs(), Convention::Squared);
        assert!((k - DMatrix::identity(4, 4)).abs().max() < 1e-300);
    }

    #[test]
    fn conventions_relate() {
        let a = sqexp_kernel_matrix(4.0, &locs(), Convention::Linear);
        let b = sqexp_kernel_matrix(2.0, &locs(), Convention::Squared);
        assert!((a - b).abs().max() < 1e-15);
    }

    #[test]
    fn eigenvalues_in_range() {
        for x in [0.0, 0.1, 1.0, 10.0] {
            let k = sqexp_kernel_matrix(x, &locs(), Convention::Linear);
            assert_eq!(k, k.transpose());
            let ev = k.symmetric_eigenvalues();
            assert!(ev.iter().all(|&l| l > -1e-12 && l <= 4.0 + 1e-12));
        }
    }

    #[test]
    fn rejects() {
        assert!(GPData::new(vec![], vec![]).is_err());
        assert!(GPData::new(locs(), vec![1.0]).is_err());
        let d = GPData::new(locs(), vec![0.0; 4]).unwrap();
        assert!(d.clone().with_prior(0.0, 1.0).is_err());
        assert!(d.clone().with_theta(-1.0).is_err());
        assert!(d.with_proposal_var(0.0).is_err());
    }
}
