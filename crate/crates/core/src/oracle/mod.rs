//! Brute-force ground truth on small finite chains.

mod ar1;
mod audit;
mod transport;

use nalgebra::{DMatrix, DVector};

use crate::error::{param, Error, Result};
use crate::metrics::{point_cost, MetricKind, MetricSpec};

pub use ar1::{ar1_pair, discrete_ar1, Ar1Config, Ar1Pair};
pub use audit::{bound_audit, bound_audit_many, random_chain_pair, AuditConfig, AuditReport, AuditRow, ChainPair};
pub use transport::{optimal_transport, TransportPlan, MAX_ATOMS};

/// Largest chain accepted by `exact_time_avg_mse`.
pub const MAX_MSE_STATES: usize = 50;
pub const MAX_MSE_STEPS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteChain {
    /// Scalar position of each state.
    pub states: Vec<f64>,
    pub p: DMatrix<f64>,
    pub v: Option<Vec<f64>>,
}

impl FiniteChain {
    pub fn new(states: Vec<f64>, p: DMatrix<f64>, v: Option<Vec<f64>>) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::Empty("finite chain".into()));
        }
        if p.nrows() != n || p.ncols() != n {
            return Err(Error::Dimension { expected: n, got: p.nrows() });
        }
        for i in 0..n {
            let row = p.row(i);
            if row.iter().any(|x| !(*x >= 0.0)) {
                return Err(param(format!("row {i} has a negative or NaN entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(param(format!("row {i} sums to {s}")));
            }
        }
        if let Some(v) = &v {
            if v.len() != n {
                return Err(Error::Dimension { expected: n, got: v.len() });
            }
            if v.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(param("V must be finite and nonnegative"));
            }
        }
        Ok(Self { states, p, v })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn v_or_zero(&self) -> Vec<f64> {
        self.v.clone().unwrap_or_else(|| vec![0.0; self.len()])
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.p.row(i).iter().copied().collect()
    }

    /// μP for a row vector μ.
    pub fn push(&self, mu: &[f64]) -> Vec<f64> {
        let m = DVector::from_column_slice(mu);
        self.p.tr_mul(&m).iter().copied().collect()
    }

    /// Pf for a function f on the states.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (&self.p * DVector::from_column_slice(f)).iter().copied().collect()
    }

    pub fn dirac(&self, i: usize) -> Vec<f64> {
        let mut d = vec![0.0; self.len()];
        d[i] = 1.0;
        d
    }

    pub fn is_irreducible(&self) -> bool {
        let n = self.len();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let w = if forward { self.p[(i, j)] } else { self.p[(j, i)] };
                    if w > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }
}

/// Solves πP = π, Σπ = 1.
pub fn stationary_exact(chain: &FiniteChain) -> Result<Vec<f64>> {
    if !chain.is_irreducible() {
        return Err(Error::Reducible("transition graph is not strongly connected".into()));
    }
    let n = chain.len();
    let mut a = chain.p.transpose() - DMatrix::identity(n, n);
    let mut rhs = DVector::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    rhs[n - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::LinearAlgebra("singular stationary system".into()))?;
    let mut pi: Vec<f64> = pi.iter().map(|x| x.max(0.0)).collect();
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= s);
    let res = chain.push(&pi).iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if res > 1e-12 {
        return Err(Error::LinearAlgebra(format!("stationary residual {res:e}")));
    }
    Ok(pi)
}

/// Distance kind, scale and weight used on a chain's state space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainMetric {
    pub kind: MetricKind,
    pub beta: f64,
    pub delta_scale: f64,
}

impl ChainMetric {
    pub fn new(kind: MetricKind, beta: f64, delta_scale: f64) -> Self {
        Self { kind, beta, delta_scale }
    }

    pub fn point(&self, pos: &[f64], v: &[f64], i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let sep = (pos[i] - pos[j]).abs();
        // Distinct states at one position still count as separated.
        let sep = if sep == 0.0 { f64::MIN_POSITIVE } else { sep };
        point_cost(self.kind, self.beta, self.delta_scale, sep, v[i], v[j])
    }

    pub fn distance(&self, pos: &[f64], v: &[f64], mu: &[f64], nu: &[f64]) -> Result<f64> {
        match self.kind {
            MetricKind::Tv | MetricKind::WeightedTv => {
                let b = if self.kind == MetricKind::Tv { 0.0 } else { self.beta };
                Ok(mu.iter().zip(nu).zip(v).map(|((a, c), w)| (1.0 + b * w) * (a - c).abs()).sum())
            }
            MetricKind::CappedW1 | MetricKind::Semimetric => {
                let n = pos.len();
                let cost: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| self.point(pos, v, i, j)).collect()).collect();
                let common: Vec<f64> = if self.kind == MetricKind::CappedW1 {
                    mu.iter().zip(nu).map(|(a, b)| a.min(*b)).collect()
                } else {
                    vec![0.0; n]
                };
                let a: Vec<f64> = mu.iter().zip(&common).map(|(x, c)| x - c).collect();
                let b: Vec<f64> = nu.iter().zip(&common).map(|(x, c)| x - c).collect();
                if a.iter().sum::<f64>() <= 0.0 {
                    return Ok(0.0);
                }
                Ok(optimal_transport(&a, &b, &cost)?.cost.max(0.0))
            }
        }
    }
}

fn chain_metric(spec: &MetricSpec) -> ChainMetric {
    ChainMetric::new(spec.kind, spec.beta, spec.delta_scale)
}

fn chain_v(chain: &FiniteChain, spec: &MetricSpec) -> Vec<f64> {
    match (&chain.v, &spec.v) {
        (Some(v), _) => v.clone(),
        (None, Some(l)) => chain.states.iter().map(|s| l.evaluate(&[*s])).collect(),
        (None, None) => vec![0.0; chain.len()],
    }
}

/// Exact distance between two distributions on the chain's states.
pub fn exact_metric(mu: &[f64], nu: &[f64], spec: &MetricSpec, chain: &FiniteChain) -> Result<f64> {
    spec.validate().or_else(|e| if chain.v.is_some() { Ok(()) } else { Err(e) })?;
    if mu.len() != chain.len() || nu.len() != chain.len() {
        return Err(Error::Dimension { expected: chain.len(), got: mu.len().min(nu.len()) });
    }
    if matches!(spec.kind, MetricKind::CappedW1 | MetricKind::Semimetric) && chain.len() > MAX_ATOMS {
        return Err(Error::SizeLimit(format!("{} states exceeds the exact coupling limit {MAX_ATOMS}", chain.len())));
    }
    chain_metric(spec).distance(&chain.states, &chain_v(chain, spec), mu, nu)
}

/// max over x≠y of dist(δ_xP, δ_yP)/dist(x, y) under an explicit weight vector.
pub fn contraction_with(chain: &FiniteChain, metric: ChainMetric, v: &[f64]) -> Result<f64> {
    let n = chain.len();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| chain.row(i)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric.point(&chain.states, v, i, j);
            if d > 0.0 {
                worst = worst.max(metric.distance(&chain.states, v, &rows[i], &rows[j])? / d);
            }
        }
    }
    Ok(worst)
}

pub fn contraction_exact(chain: &FiniteChain, spec: &MetricSpec) -> Result<f64> {
    if matches!(spec.kind, MetricKind::CappedW1 | MetricKind::Semimetric) && chain.len() > MAX_ATOMS {
        return Err(Error::SizeLimit(format!("{} states exceeds {MAX_ATOMS}", chain.len())));
    }
    contraction_with(chain, chain_metric(spec), &chain_v(chain, spec))
}

/// Exact PV per state and the smallest valid K for each candidate γ.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftFrontier {
    pub v: Vec<f64>,
    pub pv: Vec<f64>,
    pub points: Vec<(f64, f64)>,
}

impl DriftFrontier {
    pub fn k_for(&self, gamma: f64) -> f64 {
        self.v.iter().zip(&self.pv).map(|(v, pv)| pv - gamma * v).fold(0.0, f64::max)
    }

    /// The frontier point minimizing K/(1−γ).
    pub fn best_stationary(&self) -> (f64, f64) {
        self.points
            .iter()
            .copied()
            .min_by(|a, b| (a.1 / (1.0 - a.0)).total_cmp(&(b.1 / (1.0 - b.0))))
            .unwrap_or((0.5, self.k_for(0.5)))
    }
}

/// γ on the grid 0.01, 0.02, …, 0.99.
pub fn drift_exact(chain: &FiniteChain, v: &[f64]) -> Result<DriftFrontier> {
    if v.len() != chain.len() {
        return Err(Error::Dimension { expected: chain.len(), got: v.len() });
    }
    let pv = chain.apply(v);
    let mut f = DriftFrontier { v: v.to_vec(), pv, points: Vec::new() };
    f.points = (1..100).map(|k| k as f64 / 100.0).map(|g| (g, f.k_for(g))).collect();
    Ok(f)
}

/// E(1/n Σ_{k<n} φ(X_k) − c)² with X_0 ∼ init; c defaults to the stationary mean of φ.
pub fn exact_time_avg_mse(chain: &FiniteChain, phi: &[f64], init: &[f64], n: usize, center: Option<f64>) -> Result<f64> {
    let s = chain.len();
    if s > MAX_MSE_STATES {
        return Err(Error::SizeLimit(format!("{s} states exceeds {MAX_MSE_STATES}")));
    }
    if n == 0 || n > MAX_MSE_STEPS {
        return Err(Error::SizeLimit(format!("n = {n} outside 1..={MAX_MSE_STEPS}")));
    }
    if phi.len() != s || init.len() != s {
        return Err(Error::Dimension { expected: s, got: phi.len().min(init.len()) });
    }
    let c = match center {
        Some(c) => c,
        None => stationary_exact(chain)?.iter().zip(phi).map(|(p, f)| p * f).sum(),
    };
    let psi: Vec<f64> = phi.iter().map(|f| f - c).collect();
    // tail[L] = Σ_{m=1}^{L} P^m ψ
    let mut tail = vec![vec![0.0; s]];
    let mut h = psi.clone();
    for _ in 1..n {
        h = chain.apply(&h);
        let last = tail.last().unwrap();
        tail.push(last.iter().zip(&h).map(|(a, b)| a + b).collect());
    }
    let mut dist = init.to_vec();
    let mut total = 0.0;
    for j in 0..n {
        let t = &tail[n - 1 - j];
        total += (0..s).map(|x| dist[x] * psi[x] * (psi[x] + 2.0 * t[x])).sum::<f64>();
        dist = chain.push(&dist);
    }
    Ok(total / (n * n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(a: f64, b: f64) -> FiniteChain {
        FiniteChain::new(vec![0.0, 1.0], DMatrix::from_row_slice(2, 2, &[1.0 - a, a, b, 1.0 - b]), None).unwrap()
    }

    #[test]
    fn two_state_stationary() {
        let pi = stationary_exact(&two_state(0.3, 0.1)).unwrap();
        assert!((pi[0] - 0.25).abs() < 1e-14 && (pi[1] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn doubly_stochastic_uniform() {
        let p = DMatrix::from_row_slice(3, 3, &[0.2, 0.3, 0.5, 0.5, 0.2, 0.3, 0.3, 0.5, 0.2]);
        let pi = stationary_exact(&FiniteChain::new(vec![0.0, 1.0, 2.0], p, None).unwrap()).unwrap();
        assert!(pi.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-14));
    }

    #[test]
    fn permuted_chain() {
        let p = DMatrix::from_row_slice(3, 3, &[0.5, 0.25, 0.25, 0.1, 0.6, 0.3, 0.2, 0.2, 0.6]);
        let pi = stationary_exact(&FiniteChain::new(vec![0.0; 3], p.clone(), None).unwrap()).unwrap();
        let perm = [2, 0, 1];
        let q = DMatrix::from_fn(3, 3, |i, j| p[(perm[i], perm[j])]);
        let pq = stationary_exact(&FiniteChain::new(vec![0.0; 3], q, None).unwrap()).unwrap();
        for i in 0..3 {
            assert!((pq[i] - pi[perm[i]]).abs() < 1e-14);
        }
    }

    #[test]
    fn reducible_rejected() {
        let c = FiniteChain::new(vec![0.0, 1.0], DMatrix::identity(2, 2), None).unwrap();
        assert!(matches!(stationary_exact(&c), Err(Error::Reducible(_))));
    }

    #[test]
    fn capped_atoms() {
        let c = FiniteChain::new(vec![0.0, 3.0], DMatrix::identity(2, 2), None).unwrap();
        let d = exact_metric(&[1.0, 0.0], &[0.0, 1.0], &MetricSpec::capped_w1(1.0), &c).unwrap();
        assert_eq!(d, 1.0);
        assert_eq!(exact_metric(&[0.4, 0.6], &[0.4, 0.6], &MetricSpec::capped_w1(1.0), &c).unwrap(), 0.0);
    }

    #[test]
    fn contraction_extremes() {
        let same = FiniteChain::new(vec![0.0, 1.0, 2.0], DMatrix::from_fn(3, 3, |_, j| [0.2, 0.5, 0.3][j]), None).unwrap();
        assert_eq!(contraction_exact(&same, &MetricSpec::tv()).unwrap(), 0.0);
        let id = FiniteChain::new(vec![0.0, 1.0, 2.0], DMatrix::identity(3, 3), None).unwrap();
        assert!((contraction_exact(&id, &MetricSpec::tv()).unwrap() - 1.0).abs() < 1e-15);
        assert!((contraction_exact(&id, &MetricSpec::capped_w1(0.5)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn drift_constant_v() {
        let c = two_state(0.3, 0.4);
        let f = drift_exact(&c, &[2.0, 2.0]).unwrap();
        for &(g, k) in &f.points {
            assert!((k - 2.0 * (1.0 - g)).abs() < 1e-14);
        }
    }

    #[test]
    fn drift_two_state_by_hand() {
        let c = two_state(0.5, 0.25);
        let f = drift_exact(&c, &[0.0, 4.0]).unwrap();
        // PV = (2, 3); K(γ) = max(2, 3 − 4γ)
        assert!((f.k_for(0.1) - 2.6).abs() < 1e-14);
        assert!((f.k_for(0.5) - 2.0).abs() < 1e-14);
        assert!(f.points.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn mse_iid_chain() {
        let r = [0.2, 0.5, 0.3];
        let c = FiniteChain::new(vec![0.0, 1.0, 2.0], DMatrix::from_fn(3, 3, |_, j| r[j]), None).unwrap();
        let phi = [1.0, -2.0, 4.0];
        let mean: f64 = r.iter().zip(&phi).map(|(a, b)| a * b).sum();
        let var: f64 = r.iter().zip(&phi).map(|(a, b)| a * (b - mean).powi(2)).sum();
        for n in [1, 2, 7, 40] {
            let m = exact_time_avg_mse(&c, &phi, &r, n, None).unwrap();
            assert!((m - var / n as f64).abs() < 1e-12, "{n}");
        }
    }

    #[test]
    fn mse_constant_and_single_step() {
        let c = two_state(0.3, 0.2);
        let m = exact_time_avg_mse(&c, &[3.0, 3.0], &[1.0, 0.0], 17, Some(1.0)).unwrap();
        assert!((m - 4.0).abs() < 1e-12);
        let m = exact_time_avg_mse(&c, &[1.0, 5.0], &[0.0, 1.0], 1, Some(2.0)).unwrap();
        assert!((m - 9.0).abs() < 1e-14);
        assert!(exact_time_avg_mse(&c, &[1.0, 5.0], &[0.0, 1.0], 201, None).is_err());
    }
}
