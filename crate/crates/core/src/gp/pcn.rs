use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix};

use super::{decompose, GPData, GridSpec, Spectrum};
use crate::error::{param, Error, Result};
use crate::kernels::mh::accept_from_log_ratio;
use crate::lyapunov::{DriftCertificate, LyapunovSpec, Provenance};
use crate::metrics::{point_cost, MetricKind};
use crate::rng::RandomSource;
use crate::special::norm_pdf;

fn spectrum_at(x: f64, data: &GPData) -> Result<Spectrum> {
    decompose(&data.kernel_matrix_squared(x))
}

/// Φ with the r largest eigenvalues of Σ kept: ½log|2π(I+Σ_r)| + ½z′(I+Σ_r)^{−1}z.
pub fn potential_phi_rank(data: &GPData, spec: &Spectrum, r: usize) -> Result<f64> {
    let n = data.n();
    if spec.n() != n {
        return Err(Error::Dimension { expected: n, got: spec.n() });
    }
    if r > n {
        return Err(param(format!("rank {r} exceeds N = {n}")));
    }
    let uz = spec.project(data.z());
    let mut logdet = 0.0;
    let mut quad = data.z().norm_squared();
    for i in 0..r {
        let l = spec.values[i];
        logdet += l.ln_1p();
        quad -= l / (1.0 + l) * uz[i] * uz[i];
    }
    let quad = quad.max(data.z().norm_squared() / (1.0 + n as f64));
    Ok(0.5 * n as f64 * (2.0 * PI).ln() + 0.5 * logdet + 0.5 * quad)
}

/// Φ(x) on the line, Σ_ij = exp(−x²‖w_i − w_j‖²).
pub fn potential_phi(x: f64, data: &GPData) -> Result<f64> {
    potential_phi_rank(data, &spectrum_at(x, data)?, data.n())
}

/// Φ′(x) = ½tr(M^{−1}D) − ½z′M^{−1}DM^{−1}z with D = ∂Σ/∂x.
pub fn phi_derivative(x: f64, data: &GPData) -> Result<f64> {
    let n = data.n();
    let sigma = data.kernel_matrix_squared(x);
    let d = DMatrix::from_fn(n, n, |i, j| -2.0 * x * data.sq_dist()[(i, j)] * sigma[(i, j)]);
    let m = sigma + DMatrix::identity(n, n);
    let c = Cholesky::new(m).ok_or_else(|| Error::LinearAlgebra("I + Σ not positive definite".into()))?;
    let minv = c.inverse();
    let tr: f64 = minv.component_mul(&d).sum();
    let w = c.solve(data.z());
    Ok(0.5 * tr - 0.5 * w.dot(&(&d * &w)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcnStep {
    pub y: f64,
    pub alpha: f64,
    pub accepted: bool,
}

fn innovation_scale(theta: f64) -> f64 {
    (1.0 - theta * theta).max(0.0).sqrt()
}

/// y = θx + √(1−θ²)ξ accepted with 1 ∧ e^{Φ(x)−Φ(y)}. Draw order: normal, then uniform.
pub fn pcn_step(x: f64, data: &GPData, rng: &mut RandomSource) -> Result<(f64, PcnStep)> {
    let xi = rng.normal();
    let u = rng.uniform();
    let y = data.theta * x + innovation_scale(data.theta) * xi;
    let alpha = if y == x { 1.0 } else { accept_from_log_ratio(potential_phi(x, data)? - potential_phi(y, data)?) };
    let accepted = u < alpha;
    Ok((if accepted { y } else { x }, PcnStep { y, alpha, accepted }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledPcnRecord {
    pub y: f64,
    pub y_eps: f64,
    pub alpha: f64,
    pub alpha_eps: f64,
    pub accepted: bool,
    pub accepted_eps: bool,
    /// d̃_β between the two outcomes with d = 1 ∧ |·| and V = e^{|x|}.
    pub d_tilde: f64,
}

pub fn exp_lyapunov(x: f64) -> f64 {
    x.abs().exp()
}

/// Exact pCN from the first component and its snapped, rank-r approximation from the second,
/// sharing the innovation and the accept uniform.
pub fn coupled_pcn_approx_step(
    pair: (f64, f64),
    data: &GPData,
    noise_grid: &GridSpec,
    r: usize,
    beta: f64,
    rng: &mut RandomSource,
) -> Result<((f64, f64), CoupledPcnRecord)> {
    if r > data.n() {
        return Err(param(format!("rank {r} exceeds N = {}", data.n())));
    }
    let (x, xe) = pair;
    let eta = innovation_scale(data.theta) * rng.normal();
    let zeta = rng.uniform();
    let (_, eta_star) = noise_grid.snap(eta);
    let y = data.theta * x + eta;
    let y_eps = data.theta * xe + eta_star;
    let alpha = accept_from_log_ratio(potential_phi(x, data)? - potential_phi(y, data)?);
    let alpha_eps = accept_from_log_ratio(
        potential_phi_rank(data, &spectrum_at(xe, data)?, r)? - potential_phi_rank(data, &spectrum_at(y_eps, data)?, r)?,
    );
    let accepted = zeta < alpha;
    let accepted_eps = zeta < alpha_eps;
    let a = if accepted { y } else { x };
    let b = if accepted_eps { y_eps } else { xe };
    let d_tilde = point_cost(MetricKind::Semimetric, beta, 1.0, (a - b).abs(), exp_lyapunov(a), exp_lyapunov(b));
    Ok(((a, b), CoupledPcnRecord { y, y_eps, alpha, alpha_eps, accepted, accepted_eps, d_tilde }))
}

/// Φ tabulated on [0, u_max]; Φ is even in x. Values beyond u_max use the endpoint.
#[derive(Clone, Debug)]
pub struct PhiTable {
    pub step: f64,
    pub values: Vec<f64>,
}

impl PhiTable {
    pub fn build(data: &GPData, u_max: f64, step: f64, rank: Option<usize>) -> Result<Self> {
        if !(step > 0.0 && u_max > 0.0) {
            return Err(param("table range and step must be positive"));
        }
        let r = rank.unwrap_or(data.n());
        let k = (u_max / step).ceil() as usize;
        let values = (0..=k)
            .map(|i| potential_phi_rank(data, &spectrum_at(i as f64 * step, data)?, r))
            .collect::<Result<_>>()?;
        Ok(Self { step, values })
    }

    pub fn eval(&self, u: f64) -> f64 {
        let t = u.abs() / self.step;
        let i = t.floor() as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().expect("nonempty table");
        }
        let f = t - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn simpson_normal<F: Fn(f64) -> f64>(f: F, sd: f64) -> f64 {
    if sd == 0.0 {
        return f(0.0);
    }
    let (lo, hi, m) = (-12.0, 12.0, 2400usize);
    let h = (hi - lo) / m as f64;
    let mut s = 0.0;
    for i in 0..=m {
        let t = lo + i as f64 * h;
        let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * norm_pdf(t) * f(sd * t);
    }
    s * h / 3.0
}

/// Error level reachable with noise grid spacing ε₀ and rank r, from the two sufficient conditions of the coupling argument.
#[derive(Clone, Debug, PartialEq)]
pub struct PcnErrorBudget {
    pub eps0: f64,
    pub r: usize,
    /// Largest |Φ′| found on the tabulation window.
    pub lipschitz: f64,
    /// Largest |Φ − Φ_r| on the window.
    pub rank_error: f64,
    /// E[e^{|ξ+ε₀|}(1 ∧ |ξ+ε₀|)] for the scaled innovation ξ.
    pub moment: f64,
    pub eps: f64,
}

impl PcnErrorBudget {
    /// ε(1 + √(βV(x))).
    pub fn bound(&self, beta: f64, x: f64) -> f64 {
        self.eps * (1.0 + (beta * exp_lyapunov(x)).sqrt())
    }
}

pub fn pcn_error_budget(data: &GPData, eps0: f64, r: usize, u_max: f64, step: f64) -> Result<PcnErrorBudget> {
    if !(eps0 >= 0.0 && eps0.is_finite()) {
        return Err(param(format!("noise grid spacing must be nonnegative, got {eps0}")));
    }
    let exact = PhiTable::build(data, u_max, step, None)?;
    let approx = PhiTable::build(data, u_max, step, Some(r))?;
    let k = (u_max / step).ceil() as usize;
    let mut lipschitz: f64 = 0.0;
    for i in 0..=k {
        lipschitz = lipschitz.max(phi_derivative(i as f64 * step, data)?.abs());
    }
    let rank_error = exact.max_abs_diff(&approx);
    let sd = innovation_scale(data.theta);
    let moment = simpson_normal(|xi| (xi + eps0).abs().exp() * (xi + eps0).abs().min(1.0), sd);
    let a = eps0 * moment;
    let b = moment * (lipschitz * eps0 + rank_error).min(1.0);
    let eps = 2.0 * a.max(b).sqrt() * (1.0 + 1e-12);
    Ok(PcnErrorBudget { eps0, r, lipschitz, rank_error, moment, eps })
}

/// Drift certificate for V = e^{|x|} under exact pCN. PV is computed by quadrature on [0, u_max];
/// the radius is the smallest grid point beyond which PV/V stays at or below γ on the window.
pub fn pcn_drift_certificate(data: &GPData, gamma: f64, u_max: f64, step: f64) -> Result<(DriftCertificate, f64)> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(param(format!("gamma must lie in (0,1), got {gamma}")));
    }
    let table = PhiTable::build(data, u_max + 12.0, step, None)?;
    let sd = innovation_scale(data.theta);
    let xs: Vec<f64> = (0..=((u_max / step).ceil() as usize)).map(|i| i as f64 * step).collect();
    let pv: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let px = table.eval(x);
            simpson_normal(
                |e| {
                    let y = data.theta * x + e;
                    let a = (px - table.eval(y)).exp().min(1.0);
                    a * exp_lyapunov(y) + (1.0 - a) * exp_lyapunov(x)
                },
                sd,
            )
        })
        .collect();
    let ratio: Vec<f64> = pv.iter().zip(&xs).map(|(p, &x)| p / exp_lyapunov(x)).collect();
    let mut cut = xs.len();
    while cut > 0 && ratio[cut - 1] <= gamma {
        cut -= 1;
    }
    if cut == xs.len() {
        return Err(Error::NoDrift(ratio[xs.len() - 1]));
    }
    let k = (0..cut).map(|i| pv[i] - gamma * exp_lyapunov(xs[i])).fold(0.0, f64::max);
    let cert = DriftCertificate::new(LyapunovSpec::Exponential { c: 1.0, s: 1.0 }, gamma, k, Provenance::Estimated, "pcn")?;
    Ok((cert, xs[cut]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovProbe {
    pub x: f64,
    pub v: f64,
    pub mean: f64,
    pub se: f64,
    /// e^ε(γV(x) + K).
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovCheckReport {
    pub probes: Vec<LyapunovProbe>,
    /// γe^ε.
    pub factor: f64,
    pub contracting: bool,
    /// Largest log V(snap(y)) − log V(y) seen.
    pub max_log_ratio: f64,
    pub eps: f64,
}

impl LyapunovCheckReport {
    pub fn passed(&self) -> bool {
        self.contracting && self.max_log_ratio <= self.eps + 1e-12 && self.probes.iter().all(|p| p.pass)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovCheckConfig {
    pub gamma: f64,
    pub k: f64,
    pub eps: f64,
    pub reps: usize,
    /// Standard errors of slack allowed on each probe.
    pub z: f64,
}

/// Monte Carlo check of E[V(snap(Y))] ≤ e^ε(γV(x) + K) for Y drawn by `step`; no grid means no snapping.
pub fn discrete_lyapunov_check<S, F>(
    step: S,
    grid: Option<&GridSpec>,
    v: F,
    config: LyapunovCheckConfig,
    probes: &[f64],
    rng: &mut RandomSource,
) -> Result<LyapunovCheckReport>
where
    S: Fn(f64, &mut RandomSource) -> Result<f64>,
    F: Fn(f64) -> f64,
{
    if config.reps < 2 {
        return Err(param("need at least two replicates per probe"));
    }
    let factor = config.gamma * config.eps.exp();
    let mut max_log_ratio = f64::NEG_INFINITY;
    let mut out = Vec::with_capacity(probes.len());
    for &x in probes {
        let mut vals = Vec::with_capacity(config.reps);
        for _ in 0..config.reps {
            let y = step(x, rng)?;
            let ys = grid.map_or(y, |g| g.snap(y).1);
            let (vy, vs) = (v(y), v(ys));
            max_log_ratio = max_log_ratio.max(vs.ln() - vy.ln());
            vals.push(vs);
        }
        let est = crate::stats::Estimate::from_samples(&vals);
        let vx = v(x);
        let bound = config.eps.exp() * (config.gamma * vx + config.k);
        out.push(LyapunovProbe { x, v: vx, mean: est.mean, se: est.se, bound, pass: est.mean <= bound + config.z * est.se });
    }
    Ok(LyapunovCheckReport { probes: out, factor, contracting: factor < 1.0, max_log_ratio, eps: config.eps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{synthetic_gp, Convention};

    fn data() -> GPData {
        synthetic_gp(20, 1, 2.0, 1.2, Convention::Squared, 9).unwrap().with_theta(0.5).unwrap()
    }

    #[test]
    fn frozen_and_independent() {
        let d = data().with_theta(1.0).unwrap();
        let mut rng = RandomSource::new(1, 0);
        for _ in 0..10 {
            let (x, st) = pcn_step(0.7, &d, &mut rng).unwrap();
            assert_eq!((x, st.y), (0.7, 0.7));
        }
        let d = data().with_theta(0.0).unwrap();
        let mut a = RandomSource::new(5, 0);
        let mut b = RandomSource::new(5, 0);
        let (_, s1) = pcn_step(0.3, &d, &mut a).unwrap();
        let (_, s2) = pcn_step(-4.0, &d, &mut b).unwrap();
        assert_eq!(s1.y, s2.y);
    }

    #[test]
    fn derivative_matches_differences() {
        let d = data();
        for x in [-3.0, -0.4, 0.0, 0.25, 1.1, 2.5] {
            let h = 1e-5;
            let fd = (potential_phi(x + h, &d).unwrap() - potential_phi(x - h, &d).unwrap()) / (2.0 * h);
            let g = phi_derivative(x, &d).unwrap();
            assert!((fd - g).abs() <= 1e-6 * g.abs().max(1.0), "{x}: {fd} {g}");
        }
    }

    #[test]
    fn phi_even_and_bracketed() {
        let d = data();
        let n = d.n() as f64;
        let zz = d.z().norm_squared();
        let lo = 0.5 * n * (2.0 * PI).ln() + 0.5 * zz / (1.0 + n);
        let hi = 0.5 * n * (2.0 * PI).ln() + 0.5 * n * (1.0 + n).ln() + 0.5 * zz;
        for i in 0..80 {
            let x = -20.0 + 0.5 * i as f64;
            let p = potential_phi(x, &d).unwrap();
            assert!(lo <= p + 1e-9 && p <= hi + 1e-9);
            assert!((p - potential_phi(-x, &d).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_limit_coupling_agrees() {
        let d = data();
        let g = GridSpec::window(0.0, 1.0, 1e-12).unwrap();
        let mut rng = RandomSource::new(2, 0);
        let mut pair = (0.4, 0.4);
        for _ in 0..50 {
            let (p, _) = coupled_pcn_approx_step(pair, &d, &g, d.n(), 1.0, &mut rng).unwrap();
            assert!((p.0 - p.1).abs() < 1e-9);
            pair = p;
        }
        let coarse = GridSpec::window(0.0, 8.0, 0.5).unwrap();
        let mut rejected = 0;
        for _ in 0..200 {
            let (_, rec) = coupled_pcn_approx_step((2.5, 2.5), &d, &coarse, 3, 1.0, &mut rng).unwrap();
            if !rec.accepted && !rec.accepted_eps {
                assert_eq!(rec.d_tilde, 0.0);
                rejected += 1;
            }
        }
        assert!(rejected > 0);
    }

    #[test]
    fn budget_shrinks() {
        let d = data();
        let coarse = pcn_error_budget(&d, 0.1, 2, 6.0, 0.05).unwrap();
        let fine = pcn_error_budget(&d, 0.001, d.n(), 6.0, 0.05).unwrap();
        assert_eq!(fine.rank_error, 0.0);
        assert!(fine.eps < coarse.eps);
    }

    #[test]
    fn contracting_flag_arithmetic() {
        let mut rng = RandomSource::new(0, 0);
        let step = |x: f64, r: &mut RandomSource| Ok(0.5 * x + r.normal());
        let cfg = |eps| LyapunovCheckConfig { gamma: 0.9, k: 10.0, eps, reps: 50, z: 3.0 };
        let a = discrete_lyapunov_check(step, None, exp_lyapunov, cfg(0.05), &[0.0], &mut rng).unwrap();
        assert!((a.factor - 0.9 * 0.05f64.exp()).abs() < 1e-15 && a.contracting);
        let b = discrete_lyapunov_check(step, None, exp_lyapunov, cfg(0.2), &[0.0], &mut rng).unwrap();
        assert!(!b.contracting);
        assert_eq!(a.max_log_ratio, 0.0);
    }
}
