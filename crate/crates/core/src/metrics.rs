//! Pointwise and distributional distances.

use nalgebra::{DMatrix, DVector};

use crate::error::{param, Error, Result};
use crate::kernels::{coupled_step, DecomposedKernel, StateVector};
use crate::lyapunov::LyapunovSpec;
use crate::rng::RandomSource;
use crate::stats::Estimate;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    /// 2·1{x≠y}.
    Tv,
    /// (2 + βV(x) + βV(y))·1{x≠y}.
    WeightedTv,
    /// 1 ∧ |x−y|/δ.
    CappedW1,
    /// √((1 ∧ |x−y|/δ)(2 + βV(x) + βV(y))).
    Semimetric,
}

#[derive(Clone, Debug)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub beta: f64,
    pub delta_scale: f64,
    pub v: Option<LyapunovSpec>,
}

impl MetricSpec {
    pub fn tv() -> Self {
        Self { kind: MetricKind::Tv, beta: 0.0, delta_scale: 1.0, v: None }
    }

    pub fn weighted_tv(beta: f64, v: LyapunovSpec) -> Self {
        Self { kind: MetricKind::WeightedTv, beta, delta_scale: 1.0, v: Some(v) }
    }

    pub fn capped_w1(delta_scale: f64) -> Self {
        Self { kind: MetricKind::CappedW1, beta: 0.0, delta_scale, v: None }
    }

    pub fn semimetric(beta: f64, v: LyapunovSpec) -> Self {
        Self { kind: MetricKind::Semimetric, beta, delta_scale: 1.0, v: Some(v) }
    }

    pub fn with_delta(mut self, delta_scale: f64) -> Self {
        self.delta_scale = delta_scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(param(format!("beta must be finite and nonnegative, got {}", self.beta)));
        }
        if !(self.delta_scale > 0.0) {
            return Err(param(format!("delta scale must be positive, got {}", self.delta_scale)));
        }
        if matches!(self.kind, MetricKind::WeightedTv | MetricKind::Semimetric) && self.v.is_none() && self.beta > 0.0 {
            return Err(param("weighted metrics require a Lyapunov function"));
        }
        Ok(())
    }

    fn weight(&self, x: &[f64]) -> f64 {
        match &self.v {
            Some(v) if self.beta > 0.0 => v.evaluate(x),
            _ => 0.0,
        }
    }
}

/// Distance between two points given their Lyapunov values and Euclidean separation.
pub fn point_cost(kind: MetricKind, beta: f64, delta_scale: f64, sep: f64, vx: f64, vy: f64) -> f64 {
    if sep == 0.0 {
        return 0.0;
    }
    match kind {
        MetricKind::Tv => 2.0,
        MetricKind::WeightedTv => 2.0 + beta * (vx + vy),
        MetricKind::CappedW1 => (sep / delta_scale).min(1.0),
        MetricKind::Semimetric => ((sep / delta_scale).min(1.0) * (2.0 + beta * (vx + vy))).sqrt(),
    }
}

fn separation(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

pub fn pointwise_distance(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), got: y.len() });
    }
    let sep = separation(x, y);
    Ok(point_cost(spec.kind, spec.beta, spec.delta_scale, sep, spec.weight(x), spec.weight(y)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMeasure {
    pub support: Vec<StateVector>,
    pub weights: Vec<f64>,
}

impl FiniteMeasure {
    pub fn new(support: Vec<StateVector>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::Dimension { expected: support.len(), got: weights.len() });
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(param(format!("negative or non-finite weight {w}")));
        }
        if let Some(d) = support.first().map(|s| s.dim()) {
            if let Some(s) = support.iter().find(|s| s.dim() != d) {
                return Err(Error::Dimension { expected: d, got: s.dim() });
            }
        }
        Ok(Self { support, weights })
    }

    pub fn dirac(x: StateVector) -> Self {
        Self { support: vec![x], weights: vec![1.0] }
    }

    pub fn is_probability(&self) -> bool {
        (self.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12
    }

    pub fn dim(&self) -> Option<usize> {
        self.support.first().map(|s| s.dim())
    }
}

/// Σ (1+βV(s))·|μ(s) − ν(s)| over the merged support.
pub fn weighted_tv_finite(mu: &FiniteMeasure, nu: &FiniteMeasure, beta: f64, v: Option<&LyapunovSpec>) -> Result<f64> {
    if let (Some(a), Some(b)) = (mu.dim(), nu.dim()) {
        if a != b {
            return Err(Error::Dimension { expected: a, got: b });
        }
    }
    if beta > 0.0 && v.is_none() {
        return Err(param("weighted TV with beta > 0 requires a Lyapunov function"));
    }
    let key = |s: &StateVector| s.iter().map(|c| c.to_bits()).collect::<Vec<u64>>();
    let mut atoms: std::collections::BTreeMap<Vec<u64>, (StateVector, f64)> = Default::default();
    for (s, w) in mu.support.iter().zip(&mu.weights) {
        atoms.entry(key(s)).or_insert((s.clone(), 0.0)).1 += w;
    }
    for (s, w) in nu.support.iter().zip(&nu.weights) {
        atoms.entry(key(s)).or_insert((s.clone(), 0.0)).1 -= w;
    }
    Ok(atoms
        .values()
        .map(|(s, d)| {
            let vs = v.map_or(0.0, |v| v.evaluate(s));
            (1.0 + beta * vs) * d.abs()
        })
        .sum())
}

/// Optimal transport cost between two empirical laws on ℝ via the quantile coupling.
/// Unequal sizes are handled exactly by splitting quantile levels.
pub fn w1_empirical_1d(a: &[f64], b: &[f64], cap_delta: Option<f64>) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("W1 needs nonempty samples".into()));
    }
    if let Some(d) = cap_delta {
        if !(d > 0.0) {
            return Err(param(format!("cap must be positive, got {d}")));
        }
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let cost = |x: f64, y: f64| match cap_delta {
        Some(d) => ((x - y).abs() / d).min(1.0),
        None => (x - y).abs(),
    };
    if a.len() == b.len() {
        return Ok(a.iter().zip(&b).map(|(x, y)| cost(*x, *y)).sum::<f64>() / a.len() as f64);
    }
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0;
    let mut total = 0.0;
    while i < na && j < nb {
        let ea = (i + 1) as f64 / na as f64;
        let eb = (j + 1) as f64 / nb as f64;
        let next = ea.min(eb);
        total += (next - u) * cost(a[i], b[j]);
        u = next;
        if ea <= eb {
            i += 1;
        }
        if eb <= ea {
            j += 1;
        }
    }
    Ok(total)
}

/// Mean distance between the two components of the shared-randomness coupling started at (x, x).
pub fn coupled_estimate<P, Q>(
    p: &P,
    p_eps: &Q,
    x: &StateVector,
    spec: &MetricSpec,
    reps: usize,
    rng: &mut RandomSource,
) -> Result<Estimate>
where
    P: DecomposedKernel + ?Sized,
    Q: DecomposedKernel + ?Sized,
{
    spec.validate()?;
    if reps == 0 {
        return Err(Error::Empty("no replicates".into()));
    }
    let dist = |a: &StateVector, b: &StateVector| {
        point_cost(spec.kind, spec.beta, spec.delta_scale, separation(a, b), spec.weight(a), spec.weight(b))
    };
    let mut ds = Vec::with_capacity(reps);
    for _ in 0..reps {
        let (_, rec) = coupled_step(p, p_eps, x, x, dist, rng)?;
        ds.push(rec.distance);
    }
    Ok(Estimate::from_samples(&ds))
}

pub fn semimetric_coupled_estimate<P, Q>(
    p: &P,
    p_eps: &Q,
    x: &StateVector,
    beta: f64,
    v: &LyapunovSpec,
    reps: usize,
    rng: &mut RandomSource,
) -> Result<Estimate>
where
    P: DecomposedKernel + ?Sized,
    Q: DecomposedKernel + ?Sized,
{
    coupled_estimate(p, p_eps, x, &MetricSpec::semimetric(beta, v.clone()), reps, rng)
}

fn cholesky(cov: &DMatrix<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if !cov.is_square() {
        return Err(param(format!("{what} must be square")));
    }
    cov.clone()
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra(format!("{what} is not positive definite")))
}

/// KL(N(m1,S1) ‖ N(m2,S2)).
pub fn kl_gaussian(m1: &DVector<f64>, s1: &DMatrix<f64>, m2: &DVector<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    let k = m1.len();
    for n in [m2.len(), s1.nrows(), s2.nrows()] {
        if n != k {
            return Err(Error::Dimension { expected: k, got: n });
        }
    }
    let c1 = cholesky(s1, "cov1")?;
    let c2 = cholesky(s2, "cov2")?;
    let tr = c2.solve(s1).trace();
    let d = m2 - m1;
    let quad = d.dot(&c2.solve(&d));
    let ld = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| 2.0 * c.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    Ok(0.5 * (tr + quad - k as f64 + ld(&c2) - ld(&c1)).max(0.0))
}

/// TV bound √(KL/2) on the probability scale.
pub fn pinsker_tv(kl: f64) -> f64 {
    (kl.max(0.0) / 2.0).sqrt()
}

/// Pinsker bound on the 2·1{x≠y} scale.
pub fn pinsker_tv_d0(kl: f64) -> f64 {
    2.0 * pinsker_tv(kl)
}

/// (x − c)′ Σ⁻¹ (x − c), not square-rooted.
pub fn mahalanobis(x: &[f64], center: &[f64], cov: &DMatrix<f64>) -> Result<f64> {
    if x.len() != center.len() || cov.nrows() != x.len() {
        return Err(Error::Dimension { expected: x.len(), got: cov.nrows() });
    }
    let c = cholesky(cov, "covariance")?;
    let d = DVector::from_iterator(x.len(), x.iter().zip(center).map(|(a, b)| a - b));
    Ok(d.dot(&c.solve(&d)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(x: f64) -> StateVector {
        StateVector::scalar(x)
    }

    #[test]
    fn zero_on_diagonal() {
        let v = LyapunovSpec::squared_norm(1);
        for s in [MetricSpec::tv(), MetricSpec::weighted_tv(1.0, v.clone()), MetricSpec::capped_w1(0.5), MetricSpec::semimetric(2.0, v)] {
            assert_eq!(pointwise_distance(&s, &[1.3], &[1.3]).unwrap(), 0.0);
        }
    }

    #[test]
    fn capped_at_one() {
        assert_eq!(pointwise_distance(&MetricSpec::capped_w1(0.5), &[0.0], &[1.0]).unwrap(), 1.0);
        let s = MetricSpec::semimetric(0.0, LyapunovSpec::squared_norm(1));
        assert!((pointwise_distance(&s, &[0.0], &[3.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn weighted_requires_v() {
        let s = MetricSpec { kind: MetricKind::WeightedTv, beta: 1.0, delta_scale: 1.0, v: None };
        assert!(pointwise_distance(&s, &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn two_atom_weighted_tv() {
        let v = LyapunovSpec::Table(vec![1.0, 3.0]);
        let mu = FiniteMeasure::new(vec![sv(0.0), sv(1.0)], vec![1.0, 0.0]).unwrap();
        let nu = FiniteMeasure::new(vec![sv(0.0), sv(1.0)], vec![0.0, 1.0]).unwrap();
        assert_eq!(weighted_tv_finite(&mu, &nu, 1.0, Some(&v)).unwrap(), 6.0);
        assert_eq!(weighted_tv_finite(&mu, &nu, 0.0, None).unwrap(), 2.0);
        assert_eq!(weighted_tv_finite(&mu, &mu, 1.0, Some(&v)).unwrap(), 0.0);
    }

    #[test]
    fn weighted_tv_merges_disjoint_supports() {
        let mu = FiniteMeasure::dirac(sv(0.0));
        let nu = FiniteMeasure::dirac(sv(5.0));
        assert_eq!(weighted_tv_finite(&mu, &nu, 0.0, None).unwrap(), 2.0);
        let bad = FiniteMeasure::dirac(StateVector::new(vec![0.0, 1.0]).unwrap());
        assert!(weighted_tv_finite(&mu, &bad, 0.0, None).is_err());
    }

    #[test]
    fn w1_basics() {
        let a = [0.3, -1.0, 2.0];
        assert_eq!(w1_empirical_1d(&a, &a, None).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 1.0).collect();
        assert!((w1_empirical_1d(&a, &b, None).unwrap() - 1.0).abs() < 1e-15);
        assert!((w1_empirical_1d(&a, &b, Some(0.1)).unwrap() - 1.0).abs() < 1e-15);
        assert!(w1_empirical_1d(&[], &a, None).is_err());
    }

    #[test]
    fn w1_unequal_sizes() {
        let a = [0.0, 1.0];
        let b = [0.0, 0.5, 1.0, 1.5];
        let w = w1_empirical_1d(&a, &b, None).unwrap();
        assert!((w - 0.25).abs() < 1e-15);
    }

    #[test]
    fn kl_and_pinsker() {
        let m0 = DVector::from_vec(vec![0.0]);
        let m1 = DVector::from_vec(vec![1.0]);
        let i = DMatrix::identity(1, 1);
        let kl = kl_gaussian(&m0, &i, &m1, &i).unwrap();
        assert!((kl - 0.5).abs() < 1e-15);
        assert!((pinsker_tv(kl) - 0.5).abs() < 1e-15);
        assert_eq!(kl_gaussian(&m0, &i, &m0, &i).unwrap(), 0.0);
        let bad = DMatrix::from_element(1, 1, -1.0);
        assert!(kl_gaussian(&m0, &i, &m0, &bad).is_err());
    }

    #[test]
    fn kl_shared_covariance_is_half_mahalanobis() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
        let a = DVector::from_vec(vec![0.1, -0.4]);
        let b = DVector::from_vec(vec![0.7, 0.2]);
        let kl = kl_gaussian(&a, &s, &b, &s).unwrap();
        let m = mahalanobis(a.as_slice(), b.as_slice(), &s).unwrap();
        assert!((kl - 0.5 * m).abs() < 1e-14);
    }

    #[test]
    fn mahalanobis_examples() {
        let c = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        assert!((mahalanobis(&[2.0, 1.0], &[0.0, 0.0], &c).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(mahalanobis(&[1.0, 1.0], &[1.0, 1.0], &c).unwrap(), 0.0);
        let i = DMatrix::identity(2, 2);
        assert!((mahalanobis(&[3.0, 4.0], &[0.0, 0.0], &i).unwrap() - 25.0).abs() < 1e-12);
        assert!(mahalanobis(&[1.0, 0.0], &[0.0, 0.0], &DMatrix::zeros(2, 2)).is_err());
    }
}
