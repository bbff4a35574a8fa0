//! Bayesian logistic regression: full-data and minibatch random-walk Metropolis.

mod adaptive;
mod figure1;
mod loess;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{param, Error, Result};
use crate::kernels::mh::accept_from_log_ratio;
use crate::rng::RandomSource;
use crate::special::{log1p_exp, logistic};

pub use adaptive::{adaptive_rwm, adaptive_rwm_with, AdaptiveConfig, AdaptiveRun, HAARIO_LAMBDA};
pub use figure1::{figure1_experiment, figure1_on, CurvePoint, DeltaRow, Figure1Config, Figure1Result};
pub use loess::{loess_fit, Loess};

#[derive(Clone, Debug)]
pub struct LogisticData {
    n: usize,
    p: usize,
    /// Row-major N×p.
    rows: Vec<f64>,
    z: Vec<f64>,
    b: DVector<f64>,
    prior_precision: DMatrix<f64>,
}

impl LogisticData {
    pub fn new(w: &DMatrix<f64>, z: &[u8], b: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let (n, p) = w.shape();
        if n == 0 || p == 0 {
            return Err(Error::Empty("design matrix".into()));
        }
        if z.len() != n {
            return Err(Error::Dimension { expected: n, got: z.len() });
        }
        if let Some(bad) = z.iter().find(|&&v| v > 1) {
            return Err(param(format!("responses must be 0 or 1, got {bad}")));
        }
        if b.len() != p || cov.shape() != (p, p) {
            return Err(Error::Dimension { expected: p, got: b.len() });
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix".into()));
        }
        let chol = Cholesky::new(cov).ok_or_else(|| Error::LinearAlgebra("prior covariance is not positive definite".into()))?;
        let prior_precision = chol.inverse();
        let mut rows = Vec::with_capacity(n * p);
        for i in 0..n {
            rows.extend(w.row(i).iter());
        }
        Ok(Self { n, p, rows, z: z.iter().map(|&v| v as f64).collect(), b, prior_precision })
    }

    pub fn n_obs(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.p..(i + 1) * self.p]
    }

    pub fn prior_precision(&self) -> &DMatrix<f64> {
        &self.prior_precision
    }

    /// ⟨w_i, x⟩.
    pub fn eta(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// z_i⟨w_i,x⟩ − log(1 + e^{⟨w_i,x⟩}).
    pub fn loglik_term(&self, i: usize, x: &[f64]) -> f64 {
        let e = self.eta(i, x);
        self.z[i] * e - log1p_exp(e)
    }

    /// −½‖B^{−1/2}(x − b)‖².
    pub fn log_prior(&self, x: &[f64]) -> f64 {
        let d = DVector::from_column_slice(x) - &self.b;
        -0.5 * d.dot(&(&self.prior_precision * &d))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::Dimension { expected: self.p, got: x.len() });
        }
        Ok(())
    }

    /// Fisher information bound W′W/4 + B⁻¹.
    pub fn curvature_bound(&self) -> DMatrix<f64> {
        let mut m = self.prior_precision.clone();
        for i in 0..self.n {
            let r = self.row(i);
            for a in 0..self.p {
                for c in 0..self.p {
                    m[(a, c)] += 0.25 * r[a] * r[c];
                }
            }
        }
        m
    }
}

pub fn log_target(data: &LogisticData, x: &[f64]) -> Result<f64> {
    data.check(x)?;
    let s: f64 = (0..data.n).map(|i| data.loglik_term(i, x)).sum();
    Ok(s + data.log_prior(x))
}

/// Log-likelihood over the index multiset `a`, scaled by N/|a|, plus the log prior.
pub fn minibatch_log_target(data: &LogisticData, a: &[usize], x: &[f64]) -> Result<f64> {
    data.check(x)?;
    if a.is_empty() {
        return Err(Error::Empty("minibatch index set".into()));
    }
    if let Some(&bad) = a.iter().find(|&&i| i >= data.n) {
        return Err(param(format!("index {bad} out of range for {} observations", data.n)));
    }
    let s: f64 = a.iter().map(|&i| data.loglik_term(i, x)).sum();
    let scale = data.n as f64 / a.len() as f64;
    Ok(scale * s + data.log_prior(x))
}

/// W′(z − z̃(x)) − B⁻¹(x − b).
pub fn grad_log_target(data: &LogisticData, x: &[f64]) -> Result<Vec<f64>> {
    data.check(x)?;
    let mut g = vec![0.0; data.p];
    for i in 0..data.n {
        let r = data.row(i);
        let resid = data.z[i] - logistic(data.eta(i, x));
        for (gj, wj) in g.iter_mut().zip(r) {
            *gj += wj * resid;
        }
    }
    let d = DVector::from_column_slice(x) - &data.b;
    let pd = &data.prior_precision * d;
    Ok(g.iter().zip(pd.iter()).map(|(a, b)| a - b).collect())
}

/// Posterior mode by damped Newton iteration from the prior mean.
pub fn posterior_mode(data: &LogisticData, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let p = data.p;
    let mut x: Vec<f64> = data.b.iter().copied().collect();
    let mut fx = log_target(data, &x)?;
    for _ in 0..max_iter {
        let g = DVector::from_vec(grad_log_target(data, &x)?);
        if g.norm() < tol {
            return Ok(x);
        }
        let mut h = data.prior_precision.clone();
        for i in 0..data.n {
            let s = logistic(data.eta(i, &x));
            let wgt = s * (1.0 - s);
            let r = data.row(i);
            for a in 0..p {
                for c in 0..p {
                    h[(a, c)] += wgt * r[a] * r[c];
                }
            }
        }
        let step = Cholesky::new(h)
            .ok_or_else(|| Error::LinearAlgebra("negative Hessian is not positive definite".into()))?
            .solve(&g);
        let mut t = 1.0;
        loop {
            let y: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            let fy = log_target(data, &y)?;
            if fy >= fx {
                x = y;
                fx = fy;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Ok(x);
            }
        }
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MinibatchPolicy {
    pub n0: usize,
    pub resample: bool,
}

/// Draws size-N0 index subsets uniformly without replacement.
#[derive(Clone, Debug)]
pub struct SubsetSampler {
    policy: MinibatchPolicy,
    perm: Vec<usize>,
    draws: u64,
    rng: RandomSource,
}

impl SubsetSampler {
    pub fn new(policy: MinibatchPolicy, n: usize, rng: RandomSource) -> Result<Self> {
        if policy.n0 == 0 || policy.n0 > n {
            return Err(param(format!("batch size {} outside 1..={n}", policy.n0)));
        }
        Ok(Self { policy, perm: (0..n).collect(), draws: 0, rng })
    }

    pub fn policy(&self) -> MinibatchPolicy {
        self.policy
    }

    /// Identifier of the current subset: the number of draws made so far.
    pub fn subset_id(&self) -> u64 {
        self.draws
    }

    pub fn current(&self) -> &[usize] {
        &self.perm[..self.policy.n0]
    }

    /// Advances to a fresh subset when resampling is on or nothing has been drawn yet.
    /// With N0 = N the subset is the full index set in order.
    pub fn next_subset(&mut self) -> &[usize] {
        if self.draws == 0 || self.policy.resample {
            let n = self.perm.len();
            if self.policy.n0 < n {
                for k in 0..self.policy.n0 {
                    let j = k + self.rng.index(n - k);
                    self.perm.swap(k, j);
                }
            }
            self.draws += 1;
        }
        self.current()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub subset_id: u64,
    /// α(x,y) − α_A(x,y).
    pub delta: f64,
    pub alpha: f64,
    pub alpha_minibatch: f64,
    pub accepted: bool,
    /// Mahalanobis coordinate of x, when a centre is known.
    pub d: Option<f64>,
}

/// One minibatch RWM step with isotropic N(0, τ²I) proposal: noise, then subset, then uniform.
pub fn minibatch_mh_step(
    data: &LogisticData,
    sampler: &mut SubsetSampler,
    x: &[f64],
    tau: f64,
    rng: &mut RandomSource,
) -> Result<(Vec<f64>, DeltaSample)> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(param(format!("proposal scale must be positive, got {tau}")));
    }
    data.check(x)?;
    let y: Vec<f64> = x.iter().map(|xi| xi + tau * rng.normal()).collect();
    let a = sampler.next_subset().to_vec();
    let u = rng.uniform();
    let alpha = accept_from_log_ratio(log_target(data, &y)? - log_target(data, x)?);
    let alpha_mb = minibatch_accept(data, &a, x, &y)?;
    let accepted = u < alpha_mb;
    let next = if accepted { y.clone() } else { x.to_vec() };
    let sample = DeltaSample {
        x: x.to_vec(),
        y,
        subset_id: sampler.subset_id(),
        delta: alpha - alpha_mb,
        alpha,
        alpha_minibatch: alpha_mb,
        accepted,
        d: None,
    };
    Ok((next, sample))
}

/// 1 ∧ m_A(y)/m_A(x).
pub fn minibatch_accept(data: &LogisticData, a: &[usize], x: &[f64], y: &[f64]) -> Result<f64> {
    let lx = minibatch_log_target(data, a, x)?;
    if !lx.is_finite() {
        return Err(Error::InvalidState(format!("minibatch log target {lx} at current state")));
    }
    Ok(accept_from_log_ratio(minibatch_log_target(data, a, y)? - lx))
}

/// Independent N(0, I) covariates, responses from the logistic model at `truth`, prior N(0, prior_var·I).
pub fn synthetic_logistic(n: usize, truth: &[f64], prior_var: f64, seed: u64) -> Result<LogisticData> {
    let p = truth.len();
    if n == 0 || p == 0 {
        return Err(param("need at least one observation and one coefficient"));
    }
    let mut rng = RandomSource::new(seed, 0);
    let w = DMatrix::from_fn(n, p, |_, _| rng.normal());
    let z: Vec<u8> = (0..n)
        .map(|i| {
            let e: f64 = (0..p).map(|j| w[(i, j)] * truth[j]).sum();
            (rng.uniform() < logistic(e)) as u8
        })
        .collect();
    LogisticData::new(&w, &z, DVector::zeros(p), DMatrix::identity(p, p) * prior_var)
}
