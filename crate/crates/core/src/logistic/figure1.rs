use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

use super::{adaptive_rwm, loess_fit, posterior_mode, synthetic_logistic, LogisticData, MinibatchPolicy, SubsetSampler};
use crate::error::{param, Error, Result};
use crate::kernels::mh::accept_from_log_ratio;
use crate::rng::RandomSource;

#[derive(Clone, Debug, PartialEq)]
pub struct Figure1Config {
    pub n: usize,
    pub p: usize,
    pub n0_grid: Vec<usize>,
    pub eps: f64,
    /// Length of the coupled exact/minibatch run.
    pub steps: usize,
    /// Length of the adaptive Metropolis pilot.
    pub adapt_steps: usize,
    pub seed: u64,
    pub span: f64,
    pub grid_points: usize,
    pub prior_var: f64,
    /// Data-generating coefficients; defaults to alternating ±1 scaled by 1/√p.
    pub truth: Option<Vec<f64>>,
}

impl Default for Figure1Config {
    fn default() -> Self {
        Self {
            n: 10_000,
            p: 2,
            n0_grid: vec![1_000, 2_500, 5_000, 7_500, 9_000],
            eps: 0.1,
            steps: 2_000,
            adapt_steps: 5_000,
            seed: 1,
            span: 0.3,
            grid_points: 40,
            prior_var: 100.0,
            truth: None,
        }
    }
}

impl Figure1Config {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(param("n and p must be positive"));
        }
        if self.n0_grid.is_empty() {
            return Err(Error::Empty("n0 grid".into()));
        }
        if let Some(bad) = self.n0_grid.iter().find(|&&k| k == 0 || k > self.n) {
            return Err(param(format!("batch size {bad} outside 1..={}", self.n)));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(param(format!("eps {} outside (0,1]", self.eps)));
        }
        if self.steps < super::loess::MIN_POINTS {
            return Err(param(format!("need at least {} coupled steps", super::loess::MIN_POINTS)));
        }
        if !(self.span > 0.0 && self.span <= 1.0) {
            return Err(param(format!("span {} outside (0,1]", self.span)));
        }
        if self.grid_points < 2 {
            return Err(param("need at least two curve grid points"));
        }
        if !(self.prior_var > 0.0 && self.prior_var.is_finite()) {
            return Err(param("prior variance must be positive"));
        }
        if let Some(t) = &self.truth {
            if t.len() != self.p {
                return Err(Error::Dimension { expected: self.p, got: t.len() });
            }
        }
        Ok(())
    }

    fn truth(&self) -> Vec<f64> {
        self.truth.clone().unwrap_or_else(|| {
            let s = 1.0 / (self.p as f64).sqrt();
            (0..self.p).map(|j| if j % 2 == 0 { s } else { -s }).collect()
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaRow {
    pub n0: usize,
    pub d_mahalanobis: f64,
    pub abs_delta: f64,
    pub accepted_exact: bool,
    pub accepted_minibatch: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub n0: usize,
    pub d_grid: f64,
    pub p_hat: f64,
}

#[derive(Clone, Debug)]
pub struct Figure1Result {
    pub x_hat: DVector<f64>,
    pub sigma_hat: DMatrix<f64>,
    pub pilot_acceptance: f64,
    pub exact_acceptance: f64,
    pub rows: Vec<DeltaRow>,
    pub curves: Vec<CurvePoint>,
    pub eps: f64,
}

impl Figure1Result {
    /// Fraction of steps with |Δ| < ε among states with D ≤ radius.
    pub fn center_probability(&self, n0: usize, radius: f64) -> Option<f64> {
        let (hit, tot) = self
            .rows
            .iter()
            .filter(|r| r.n0 == n0 && r.d_mahalanobis <= radius)
            .fold((0usize, 0usize), |(h, t), r| (h + (r.abs_delta < self.eps) as usize, t + 1));
        (tot > 0).then(|| hit as f64 / tot as f64)
    }

    pub fn curve(&self, n0: usize) -> Vec<&CurvePoint> {
        self.curves.iter().filter(|c| c.n0 == n0).collect()
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn figure1_experiment(config: &Figure1Config) -> Result<Figure1Result> {
    config.validate()?;
    let data = synthetic_logistic(config.n, &config.truth(), config.prior_var, config.seed)?;
    figure1_on(&data, config)
}

/// Same experiment on supplied data; `config.n` and `config.p` must match it.
pub fn figure1_on(data: &LogisticData, config: &Figure1Config) -> Result<Figure1Result> {
    config.validate()?;
    if data.n_obs() != config.n || data.dim() != config.p {
        return Err(Error::Dimension { expected: config.n * config.p, got: data.n_obs() * data.dim() });
    }
    let p = config.p;
    let mut rng = RandomSource::new(config.seed, 1);
    let start = posterior_mode(&data, 1e-8, 100)?;
    let pilot = adaptive_rwm(&data, config.adapt_steps, &start, &mut rng)?;
    let x_hat = pilot.mean.clone();
    let sigma_hat = pilot.cov.clone();
    let prec = Cholesky::new(sigma_hat.clone())
        .ok_or_else(|| Error::LinearAlgebra("estimated posterior covariance is not positive definite".into()))?
        .inverse();
    let prop = Cholesky::new(pilot.proposal_cov.clone())
        .ok_or_else(|| Error::LinearAlgebra("adapted proposal covariance is not positive definite".into()))?;
    let prop_l = prop.l();

    let mut samplers: Vec<SubsetSampler> = config
        .n0_grid
        .iter()
        .enumerate()
        .map(|(k, &n0)| SubsetSampler::new(MinibatchPolicy { n0, resample: true }, config.n, rng.substream(100 + k as u64)))
        .collect::<Result<_>>()?;

    let n = config.n;
    let scale: Vec<f64> = config.n0_grid.iter().map(|&k| n as f64 / k as f64).collect();
    let mut x: Vec<f64> = x_hat.iter().copied().collect();
    let mut lx_terms: Vec<f64> = (0..n).map(|i| data.loglik_term(i, &x)).collect();
    let mut lx_prior = data.log_prior(&x);
    let mut ly_terms = vec![0.0; n];
    let mut per_n0: Vec<Vec<DeltaRow>> = vec![Vec::with_capacity(config.steps); config.n0_grid.len()];
    let mut exact_acc = 0usize;

    for _ in 0..config.steps {
        let z = DVector::from_vec(rng.normals(p));
        let step = &prop_l * z;
        let y: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let u = rng.uniform();
        ly_terms.par_iter_mut().enumerate().for_each(|(i, t)| *t = data.loglik_term(i, &y));
        let ly_prior = data.log_prior(&y);
        let full: f64 = ly_terms.iter().zip(&lx_terms).map(|(a, b)| a - b).sum::<f64>() + ly_prior - lx_prior;
        let alpha = accept_from_log_ratio(full);
        let accepted_exact = u < alpha;
        let dx = DVector::from_column_slice(&x) - &x_hat;
        let d = dx.dot(&(&prec * &dx));

        let (lyt, lxt) = (&ly_terms, &lx_terms);
        samplers
            .par_iter_mut()
            .zip(per_n0.par_iter_mut())
            .zip(scale.par_iter())
            .for_each(|((s, out), &sc)| {
                let a = s.next_subset();
                let r: f64 = if a.len() == n {
                    full
                } else {
                    sc * a.iter().map(|&i| lyt[i] - lxt[i]).sum::<f64>() + ly_prior - lx_prior
                };
                let alpha_mb = accept_from_log_ratio(r);
                out.push(DeltaRow {
                    n0: s.policy().n0,
                    d_mahalanobis: d,
                    abs_delta: (alpha - alpha_mb).abs(),
                    accepted_exact,
                    accepted_minibatch: u < alpha_mb,
                });
            });

        if accepted_exact {
            exact_acc += 1;
            x = y;
            std::mem::swap(&mut lx_terms, &mut ly_terms);
            lx_prior = ly_prior;
        }
    }

    let mut curves = Vec::new();
    for rows in &per_n0 {
        let ds: Vec<f64> = rows.iter().map(|r| r.d_mahalanobis).collect();
        let hits: Vec<f64> = rows.iter().map(|r| (r.abs_delta < config.eps) as u8 as f64).collect();
        let mut sorted = ds.clone();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (quantile(&sorted, 0.02), quantile(&sorted, 0.98));
        let fit = loess_fit(&ds, &hits, config.span)?;
        let m = config.grid_points;
        for g in 0..m {
            let t = lo + (hi - lo) * g as f64 / (m - 1) as f64;
            curves.push(CurvePoint { n0: rows[0].n0, d_grid: t, p_hat: fit.eval(t).clamp(0.0, 1.0) });
        }
    }

    Ok(Figure1Result {
        x_hat,
        sigma_hat,
        pilot_acceptance: pilot.acceptance_rate,
        exact_acceptance: exact_acc as f64 / config.steps as f64,
        rows: per_n0.into_iter().flatten().collect(),
        curves,
        eps: config.eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Figure1Config {
        Figure1Config { n: 500, n0_grid: vec![100, 500], steps: 300, adapt_steps: 1_000, ..Default::default() }
    }

    #[test]
    fn full_batch_curve_is_one() {
        let r = figure1_experiment(&tiny()).unwrap();
        for c in r.curve(500) {
            assert_eq!(c.p_hat, 1.0);
        }
        assert!(r.rows.iter().filter(|r| r.n0 == 500).all(|r| r.abs_delta == 0.0 && r.accepted_exact == r.accepted_minibatch));
        assert!(r.rows.iter().all(|r| r.abs_delta <= 1.0));
    }

    #[test]
    fn deterministic() {
        let a = figure1_experiment(&tiny()).unwrap();
        let b = figure1_experiment(&tiny()).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn bad_config() {
        let mut c = tiny();
        c.n0_grid = vec![501];
        assert!(figure1_experiment(&c).is_err());
        c.n0_grid = vec![];
        assert!(figure1_experiment(&c).is_err());
    }
}
