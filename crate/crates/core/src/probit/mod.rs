//! Binomial probit regression: data-augmentation Gibbs sampler, its Gaussian
//! moment-matched approximation, and the adaptive hybrid of the two.

mod truncnorm;

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{param, Error, Result};
use crate::kernels::{Kernel, StateVector};
use crate::lyapunov::{DriftCertificate, LyapunovSpec, Provenance};
use crate::rng::RandomSource;
use crate::special::{norm_cdf, norm_ppf};

pub use truncnorm::{inverse_mills, mills_excess, sample_trunc_normal, trunc_normal_moments, Side, TAIL_SWITCH};

#[derive(Clone, Debug)]
struct GaussianPrior {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct ProbitData {
    w: DMatrix<f64>,
    z: Vec<u32>,
    m: Vec<u32>,
    gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    psi_diag: Vec<f64>,
    hypothesis: bool,
    prior: Option<GaussianPrior>,
    post_chol: Option<Cholesky<f64, Dyn>>,
}

impl ProbitData {
    pub fn new(w: DMatrix<f64>, z: Vec<u32>, m: Vec<u32>) -> Result<Self> {
        let n = w.nrows();
        if n == 0 || w.ncols() == 0 {
            return Err(Error::Empty("design matrix".into()));
        }
        if z.len() != n {
            return Err(Error::Dimension { expected: n, got: z.len() });
        }
        if m.len() != n {
            return Err(Error::Dimension { expected: n, got: m.len() });
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix".into()));
        }
        for (i, (&zi, &mi)) in z.iter().zip(&m).enumerate() {
            if zi > mi {
                return Err(param(format!("row {i}: z = {zi} exceeds m = {mi}")));
            }
        }
        let d = DVector::from_iterator(n, m.iter().map(|&v| v as f64));
        let wd = DMatrix::from_fn(n, w.ncols(), |i, j| w[(i, j)] * d[i]);
        let gram = w.transpose() * wd;
        let chol = Cholesky::new(gram.clone())
            .ok_or_else(|| Error::LinearAlgebra("W'DW is not positive definite".into()))?;
        let minv_wt = chol.solve(&w.transpose());
        let psi_diag = (0..n).map(|i| w.row(i).dot(&minv_wt.column(i).transpose())).collect();
        let hypothesis = z.iter().zip(&m).all(|(&zi, &mi)| zi > 0 && zi < mi);
        Ok(Self { w, z, m, gram, chol, psi_diag, hypothesis, prior: None, post_chol: None })
    }

    /// Replaces the flat prior with Normal(b, B).
    pub fn with_prior(mut self, b: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let p = self.dim();
        if b.len() != p || cov.nrows() != p || cov.ncols() != p {
            return Err(Error::Dimension { expected: p, got: b.len() });
        }
        let precision = Cholesky::new(cov)
            .ok_or_else(|| Error::LinearAlgebra("prior covariance is not positive definite".into()))?
            .inverse();
        let post = Cholesky::new(&self.gram + &precision)
            .ok_or_else(|| Error::LinearAlgebra("posterior precision is not positive definite".into()))?;
        self.prior = Some(GaussianPrior { mean: b, precision });
        self.post_chol = Some(post);
        Ok(self)
    }

    pub fn n_obs(&self) -> usize {
        self.w.nrows()
    }

    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn successes(&self) -> &[u32] {
        &self.z
    }

    pub fn trials(&self) -> &[u32] {
        &self.m
    }

    /// M = W′DW.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Diagonal of W M⁻¹ W′.
    pub fn psi_diag(&self) -> &[f64] {
        &self.psi_diag
    }

    /// True when every row has 0 < z_i < m_i.
    pub fn hypothesis_holds(&self) -> bool {
        self.hypothesis
    }

    pub fn has_prior(&self) -> bool {
        self.prior.is_some()
    }

    pub fn max_trials(&self) -> u32 {
        self.m.iter().copied().max().unwrap_or(0)
    }

    /// V(x) = x′W′DWx.
    pub fn lyapunov(&self) -> LyapunovSpec {
        LyapunovSpec::Quadratic(self.gram.clone())
    }

    fn linear_predictor(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("non-finite coefficient".into()));
        }
        Ok(&self.w * x)
    }

    /// Conditional mean and variance of ω_i given x.
    pub fn latent_moments(&self, x: &DVector<f64>) -> Result<Vec<(f64, f64)>> {
        let xi = self.linear_predictor(x)?;
        Ok((0..self.n_obs()).map(|i| self.component_moments(i, xi[i])).collect())
    }

    fn component_moments(&self, i: usize, xi: f64) -> (f64, f64) {
        let zp = self.z[i] as f64;
        let zn = (self.m[i] - self.z[i]) as f64;
        let (mp, vp) = trunc_normal_moments(xi, Side::Positive);
        let (mn, vn) = trunc_normal_moments(xi, Side::Negative);
        let mean = if zp > 0.0 { zp * mp } else { 0.0 } + if zn > 0.0 { zn * mn } else { 0.0 };
        let var = if zp > 0.0 { zp * vp } else { 0.0 } + if zn > 0.0 { zn * vn } else { 0.0 };
        (mean, var)
    }

    /// Components that the adaptive step samples exactly at this threshold.
    pub fn exact_route(&self, threshold: u32) -> Vec<bool> {
        self.z
            .iter()
            .zip(&self.m)
            .map(|(&z, &m)| z < threshold || m - z < threshold)
            .collect()
    }

    /// Exact E[V(x′) | x], identical for the exact and the approximate kernel.
    pub fn conditional_v_mean(&self, x: &DVector<f64>) -> Result<f64> {
        let mom = self.latent_moments(x)?;
        let mean = DVector::from_iterator(mom.len(), mom.iter().map(|m| m.0));
        let b = self.w.transpose() * &mean;
        let quad = b.dot(&self.chol.solve(&b));
        let diag: f64 = mom.iter().zip(&self.psi_diag).map(|(m, p)| m.1 * p).sum();
        Ok(self.dim() as f64 + quad + diag)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbitState {
    pub x: DVector<f64>,
    pub omega: Option<Vec<f64>>,
}

impl ProbitState {
    pub fn new(x: DVector<f64>) -> Self {
        Self { x, omega: None }
    }

    pub fn zeros(p: usize) -> Self {
        Self::new(DVector::zeros(p))
    }
}

fn exact_component(z: u32, m: u32, xi: f64, rng: &mut RandomSource) -> f64 {
    let mut s = 0.0;
    for _ in 0..z {
        s += sample_trunc_normal(xi, Side::Positive, rng);
    }
    for _ in z..m {
        s += sample_trunc_normal(xi, Side::Negative, rng);
    }
    s
}

fn approx_component(z: u32, m: u32, xi: f64, rng: &mut RandomSource) -> f64 {
    let zp = z as f64;
    let zn = (m - z) as f64;
    let (mp, vp) = trunc_normal_moments(xi, Side::Positive);
    let (mn, vn) = trunc_normal_moments(xi, Side::Negative);
    let up = rng.normal();
    let un = rng.normal();
    let mut s = 0.0;
    if z > 0 {
        s += zp * mp + (zp * vp).sqrt() * up;
    }
    if m > z {
        s += zn * mn + (zn * vn).sqrt() * un;
    }
    s
}

fn gibbs_step<F>(data: &ProbitData, state: &ProbitState, rng: &mut RandomSource, exact: F) -> Result<ProbitState>
where
    F: Fn(usize) -> bool,
{
    let xi = data.linear_predictor(&state.x)?;
    let omega: Vec<f64> = (0..data.n_obs())
        .map(|i| {
            let (z, m) = (data.z[i], data.m[i]);
            if exact(i) {
                exact_component(z, m, xi[i], rng)
            } else {
                approx_component(z, m, xi[i], rng)
            }
        })
        .collect();
    let x = update_coefficients(data, &omega, rng);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coefficient update".into()));
    }
    Ok(ProbitState { x, omega: Some(omega) })
}

fn update_coefficients(data: &ProbitData, omega: &[f64], rng: &mut RandomSource) -> DVector<f64> {
    let p = data.dim();
    let om = DVector::from_column_slice(omega);
    let mut rhs = data.w.transpose() * om;
    let chol = match (&data.prior, &data.post_chol) {
        (Some(prior), Some(post)) => {
            rhs += &prior.precision * &prior.mean;
            post
        }
        _ => &data.chol,
    };
    let mean = chol.solve(&rhs);
    let zeta = DVector::from_vec(rng.normals(p));
    let noise = chol
        .l()
        .transpose()
        .solve_upper_triangular(&zeta)
        .unwrap_or_else(|| DVector::zeros(p));
    mean + noise
}

pub fn exact_gibbs_step(data: &ProbitData, state: &ProbitState, rng: &mut RandomSource) -> Result<ProbitState> {
    gibbs_step(data, state, rng, |_| true)
}

/// Latent sums replaced by Gaussians with matching moments: 2N normal draws.
pub fn approx_gibbs_step(data: &ProbitData, state: &ProbitState, rng: &mut RandomSource) -> Result<ProbitState> {
    gibbs_step(data, state, rng, |_| false)
}

/// Exact sums for components with z_i or m_i − z_i below `threshold`.
pub fn adaptive_gibbs_step(
    data: &ProbitData,
    state: &ProbitState,
    threshold: u32,
    rng: &mut RandomSource,
) -> Result<ProbitState> {
    let route = data.exact_route(threshold);
    gibbs_step(data, state, rng, |i| route[i])
}

/// TV-type bound (√2/4)·√(Σ var(ω_i|x) ψ_ii) between exact and approximate steps.
pub fn pinsker_tv_bound(data: &ProbitData, state: &ProbitState) -> Result<f64> {
    let mom = data.latent_moments(&state.x)?;
    let s: f64 = mom.iter().zip(&data.psi_diag).map(|(m, p)| m.1 * p).sum();
    Ok(2f64.sqrt() / 4.0 * s.max(0.0).sqrt())
}

/// Probes used to evaluate the drift constant: a centre estimate and rays around it and the origin.
pub fn drift_probe_states(data: &ProbitData) -> Vec<DVector<f64>> {
    let p = data.dim();
    let center = empirical_center(data);
    let mut rng = RandomSource::new(0x5eed_d21f, 0);
    let mut dirs: Vec<DVector<f64>> = Vec::new();
    for j in 0..p {
        for s in [-1.0, 1.0] {
            let mut e = DVector::zeros(p);
            e[j] = s;
            dirs.push(e);
        }
    }
    for _ in 0..48 {
        let d = DVector::from_vec(rng.normals(p));
        let n = d.norm();
        if n > 0.0 {
            dirs.push(d / n);
        }
    }
    let scale = data.gram.diagonal().iter().cloned().fold(0.0, f64::max).sqrt().max(1e-12);
    let mut out = vec![DVector::zeros(p), center.clone()];
    for d in &dirs {
        for r in [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0] {
            out.push(&center + d * (r / scale));
            out.push(d * (r / scale));
        }
    }
    out
}

fn empirical_center(data: &ProbitData) -> DVector<f64> {
    let n = data.n_obs();
    let target = DVector::from_iterator(
        n,
        (0..n).map(|i| {
            let m = data.m[i] as f64;
            if m == 0.0 {
                0.0
            } else {
                let f = (data.z[i] as f64 + 0.5) / (m + 1.0);
                norm_ppf(f) * m
            }
        }),
    );
    data.chol.solve(&(data.w.transpose() * target))
}

/// γ = 1 − 1/max m_i, K the largest exact E[V(x′)|x] − γV(x) over the probes.
pub fn probit_drift_constants(data: &ProbitData) -> Result<DriftCertificate> {
    probit_drift_constants_with(data, &[])
}

/// As `probit_drift_constants`, also maximizing over caller-supplied states.
pub fn probit_drift_constants_with(data: &ProbitData, extra: &[DVector<f64>]) -> Result<DriftCertificate> {
    if !data.hypothesis {
        return Err(Error::Hypothesis(
            "drift constant requires 0 < z_i < m_i for every row; a row with z_i = 0 or z_i = m_i lets V grow without contraction along its direction".into(),
        ));
    }
    let gamma = 1.0 - 1.0 / data.max_trials() as f64;
    let v = data.lyapunov();
    let mut k: f64 = 0.0;
    for x in drift_probe_states(data).iter().chain(extra) {
        let e = data.conditional_v_mean(x)?;
        k = k.max(e - gamma * v.evaluate(x.as_slice()));
    }
    DriftCertificate::new(v, gamma, k, Provenance::AnalyticGammaEstimatedK, "probit-gibbs")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GibbsMode {
    Exact,
    Approximate,
    Adaptive(u32),
}

/// Gibbs step on the coefficient vector as a `Kernel`.
#[derive(Clone, Debug)]
pub struct ProbitKernel {
    data: Arc<ProbitData>,
    mode: GibbsMode,
    label: String,
}

impl ProbitKernel {
    pub fn new(data: Arc<ProbitData>, mode: GibbsMode) -> Self {
        let label = match mode {
            GibbsMode::Exact => "probit-exact".to_string(),
            GibbsMode::Approximate => "probit-approx".to_string(),
            GibbsMode::Adaptive(t) => format!("probit-adaptive-{t}"),
        };
        Self { data, mode, label }
    }

    pub fn data(&self) -> &ProbitData {
        &self.data
    }
}

impl Kernel for ProbitKernel {
    fn step(&self, x: &StateVector, rng: &mut RandomSource) -> Result<StateVector> {
        let s = ProbitState::new(DVector::from_column_slice(x.coords()));
        let next = match self.mode {
            GibbsMode::Exact => exact_gibbs_step(&self.data, &s, rng)?,
            GibbsMode::Approximate => approx_gibbs_step(&self.data, &s, rng)?,
            GibbsMode::Adaptive(t) => adaptive_gibbs_step(&self.data, &s, t, rng)?,
        };
        StateVector::new(next.x.as_slice().to_vec())
    }

    fn label(&self) -> &str {
        &self.label
    }
}

/// Synthetic data: intercept plus standard normal covariates, m_i uniform on
/// {2, …, m_max} with row 0 at m_max, z_i binomial then clamped into [1, m_i − 1].
pub fn synthetic_probit(n: usize, p: usize, m_max: u32, seed: u64) -> Result<(ProbitData, DVector<f64>)> {
    if n == 0 || p == 0 || m_max < 2 {
        return Err(param("need n ≥ 1, p ≥ 1, m_max ≥ 2"));
    }
    let mut rng = RandomSource::new(seed, 0);
    let w = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.normal() });
    let truth = DVector::from_fn(p, |j, _| if j == 0 { 0.2 } else { 0.5 / j as f64 });
    let xi = &w * &truth;
    let mut m = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for i in 0..n {
        let mi = if i == 0 { m_max } else { 2 + rng.index((m_max - 1) as usize) as u32 };
        let pr = norm_cdf(xi[i]);
        let zi = (0..mi).filter(|_| rng.uniform() < pr).count() as u32;
        m.push(mi);
        z.push(zi.clamp(1, mi - 1));
    }
    Ok((ProbitData::new(w, z, m)?, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ProbitData {
        ProbitData::new(DMatrix::from_element(1, 1, 1.0), vec![1], vec![2]).unwrap()
    }

    #[test]
    fn toy_pinsker_by_hand() {
        let d = toy();
        assert!((d.psi_diag()[0] - 0.5).abs() < 1e-15);
        let (_, vp) = trunc_normal_moments(0.0, Side::Positive);
        let want = 2f64.sqrt() / 4.0 * (2.0 * vp * 0.5).sqrt();
        let got = pinsker_tv_bound(&d, &ProbitState::zeros(1)).unwrap();
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn gamma_from_max_trials() {
        let w = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]);
        let d = ProbitData::new(w, vec![3, 5, 7], vec![10, 20, 30]).unwrap();
        let c = probit_drift_constants(&d).unwrap();
        assert!((c.gamma - 29.0 / 30.0).abs() < 1e-15);
        assert!(c.k > 0.0);
    }

    #[test]
    fn hypothesis_error() {
        let w = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let d = ProbitData::new(w, vec![0, 2], vec![4, 4]).unwrap();
        assert!(!d.hypothesis_holds());
        assert!(matches!(probit_drift_constants(&d), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn rejects_bad_counts() {
        let w = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(ProbitData::new(w.clone(), vec![3], vec![2]).is_err());
        assert!(matches!(ProbitData::new(DMatrix::zeros(1, 1), vec![0], vec![1]), Err(Error::LinearAlgebra(_))));
    }

    #[test]
    fn zero_trial_row_is_deterministic() {
        let w = DMatrix::from_row_slice(2, 1, &[1.0, 0.5]);
        let d = ProbitData::new(w, vec![1, 0], vec![2, 0]).unwrap();
        let mut rng = RandomSource::new(1, 0);
        for step in [exact_gibbs_step, approx_gibbs_step] {
            let s = step(&d, &ProbitState::zeros(1), &mut rng).unwrap();
            assert_eq!(s.omega.unwrap()[1], 0.0);
        }
    }

    #[test]
    fn adaptive_extremes_are_bitwise() {
        let (d, _) = synthetic_probit(12, 2, 9, 3).unwrap();
        let s = ProbitState::new(DVector::from_vec(vec![0.1, -0.3]));
        let a = exact_gibbs_step(&d, &s, &mut RandomSource::new(5, 1)).unwrap();
        let b = adaptive_gibbs_step(&d, &s, 10, &mut RandomSource::new(5, 1)).unwrap();
        assert_eq!(a, b);
        let a = approx_gibbs_step(&d, &s, &mut RandomSource::new(5, 1)).unwrap();
        let b = adaptive_gibbs_step(&d, &s, 0, &mut RandomSource::new(5, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn routing_rule() {
        let w = DMatrix::from_row_slice(4, 1, &[1.0, 1.0, 1.0, 1.0]);
        let d = ProbitData::new(w, vec![1, 5, 9, 5], vec![10, 10, 10, 6]).unwrap();
        assert_eq!(d.exact_route(3), vec![true, false, true, true]);
        assert_eq!(d.exact_route(0), vec![false; 4]);
    }

    #[test]
    fn approx_draws_two_normals_per_row() {
        let (d, _) = synthetic_probit(7, 2, 30, 1).unwrap();
        let s = ProbitState::zeros(2);
        let mut r1 = RandomSource::new(2, 0);
        approx_gibbs_step(&d, &s, &mut r1).unwrap();
        let mut r2 = RandomSource::new(2, 0);
        r2.normals(2 * 7 + 2);
        assert_eq!(r1.next_seed(), r2.next_seed());
    }

    #[test]
    fn prior_variant_runs() {
        let (d, _) = synthetic_probit(10, 2, 5, 8).unwrap();
        let d = d.with_prior(DVector::zeros(2), DMatrix::identity(2, 2) * 4.0).unwrap();
        let s = exact_gibbs_step(&d, &ProbitState::zeros(2), &mut RandomSource::new(0, 0)).unwrap();
        assert!(s.x.iter().all(|v| v.is_finite()));
    }
}
