use nalgebra::Cholesky;

use super::{decompose, GPData, GridSpec, SpectralCache, Spectrum};
use crate::error::{param, Error, Result};
use crate::kernels::mh::accept_from_log_ratio;
use crate::kernels::theta::{wrap_noise, wrapped_gaussian_logdensity};
use crate::rng::RandomSource;

/// log of |I + Σ_r|^{−1/2} (b + z′(I + Σ_r)^{−1}z)^{−(a+N)/2} with Σ_r keeping the r largest eigenvalues.
pub fn low_rank_log_marginal(data: &GPData, spec: &Spectrum, r: usize) -> Result<f64> {
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
    // Rounding can push the quadratic form just below its floor z′z/(1+N).
    let quad = quad.max(data.z().norm_squared() / (1.0 + n as f64));
    let v = -0.5 * logdet - 0.5 * (data.a + n as f64) * (data.b + quad).ln();
    if !v.is_finite() {
        return Err(Error::NonFinite("log marginal".into()));
    }
    Ok(v)
}

pub fn gp_log_marginal(data: &GPData, spec: &Spectrum) -> Result<f64> {
    low_rank_log_marginal(data, spec, data.n())
}

/// Same quantity through a Cholesky factor of I + Σ(x).
pub fn gp_log_marginal_dense(x: f64, data: &GPData) -> Result<f64> {
    let n = data.n();
    let m = data.kernel_matrix(x) + nalgebra::DMatrix::identity(n, n);
    let c = Cholesky::new(m).ok_or_else(|| Error::LinearAlgebra("I + Σ not positive definite".into()))?;
    let logdet: f64 = 2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let quad = data.z().dot(&c.solve(data.z()));
    let v = -0.5 * logdet - 0.5 * (data.a + n as f64) * (data.b + quad).ln();
    if !v.is_finite() {
        return Err(Error::NonFinite("log marginal".into()));
    }
    Ok(v)
}

/// Log target under the uniform prior on S; −∞ outside S.
pub fn bounded_log_target(x: f64, data: &GPData, spec: &Spectrum) -> Result<f64> {
    if !data.interval.contains(x) {
        return Ok(f64::NEG_INFINITY);
    }
    gp_log_marginal(data, spec)
}

/// α_ε with rank-r spectra at both states.
pub fn low_rank_accept(data: &GPData, sx: &Spectrum, sy: &Spectrum, r: usize) -> Result<f64> {
    Ok(accept_from_log_ratio(low_rank_log_marginal(data, sy, r)? - low_rank_log_marginal(data, sx, r)?))
}

/// Smallest r with |α − α_r| < eps, scanning upward; N when none qualifies.
pub fn adaptive_rank(data: &GPData, sx: &Spectrum, sy: &Spectrum, eps: f64) -> Result<usize> {
    let n = data.n();
    let exact = low_rank_accept(data, sx, sy, n)?;
    for r in 0..n {
        if (exact - low_rank_accept(data, sx, sy, r)?).abs() < eps {
            return Ok(r);
        }
    }
    Ok(n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizedStep {
    /// Continuous wrapped-Gaussian draw.
    pub y_star: f64,
    /// Its nearest grid point.
    pub y: f64,
    pub index: usize,
    pub alpha: f64,
    pub accepted: bool,
}

fn cached_spectrum(data: &GPData, grid: &GridSpec, cache: &SpectralCache, x: f64) -> Result<std::sync::Arc<Spectrum>> {
    match grid.index_of(x) {
        Some(k) => cache.get_or_insert_with(k as i64, || decompose(&data.kernel_matrix(grid.point(k)))),
        None => Ok(std::sync::Arc::new(decompose(&data.kernel_matrix(x))?)),
    }
}

/// Wrapped proposal, snapped to the grid, accepted with the exact ratio. Draw order: normal, then uniform.
pub fn discretized_mh_step(
    data: &GPData,
    grid: &GridSpec,
    cache: &SpectralCache,
    x: f64,
    rng: &mut RandomSource,
) -> Result<(f64, DiscretizedStep)> {
    if !data.interval.contains(x) {
        return Err(Error::InvalidState(format!("x = {x} outside the support interval")));
    }
    let xi = rng.normal();
    let u = rng.uniform();
    let y_star = wrap_noise(x, data.v, &data.interval, xi)?;
    let (k, y) = grid.snap(y_star);
    let index = k.ok_or_else(|| Error::InvalidState(format!("proposal {y_star} fell outside the grid")))?;
    let sx = cached_spectrum(data, grid, cache, x)?;
    let sy = cached_spectrum(data, grid, cache, y)?;
    let alpha = accept_from_log_ratio(bounded_log_target(y, data, &sy)? - bounded_log_target(x, data, &sx)?);
    let accepted = u < alpha;
    Ok((if accepted { y } else { x }, DiscretizedStep { y_star, y, index, alpha, accepted }))
}

fn simpson<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64, m: usize) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let m = m + m % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a)? + f(b)?;
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h)?;
    }
    Ok(s * h / 3.0)
}

/// Cost of the snap coupling E[1 ∧ |Y − snap(Y)|/δ] for Y from the wrapped proposal at x, by quadrature.
/// Snapping is monotone, so this is the capped Wasserstein distance between the two proposals whenever h/2 ≤ δ.
pub fn snap_coupling_w1(data: &GPData, grid: &GridSpec, x: f64, delta_scale: f64) -> Result<f64> {
    if !(delta_scale > 0.0) {
        return Err(param(format!("delta scale must be positive, got {delta_scale}")));
    }
    let s = data.interval;
    let h = grid.spacing();
    let dens = |y: f64| wrapped_gaussian_logdensity(x, y, data.v, &s).map(f64::exp);
    let mut total = 0.0;
    for k in 0..grid.len() {
        let c = grid.point(k);
        let lo = (c - 0.5 * h).max(s.lo);
        let hi = (c + 0.5 * h).min(s.hi);
        let cost = |y: f64| Ok(dens(y)? * ((y - c).abs() / delta_scale).min(1.0));
        total += simpson(cost, lo, c, 16)? + simpson(cost, c, hi, 16)?;
    }
    Ok(total)
}

/// Log-scale constants bounding the bounded-interval target, proposal and acceptance derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoryConstants {
    /// log C₀, lower bound on the marginal likelihood.
    pub log_target_lower: f64,
    /// log C₁, upper bound on the marginal likelihood.
    pub log_target_upper: f64,
    /// log c₀ = −log C₁ + log min q*.
    pub log_q_lower: f64,
    /// log c₁ = −log C₀ + log max q*.
    pub log_q_upper: f64,
    /// (ΣΣ‖w_i − w_j‖²)^{1/2}.
    pub d_bar: f64,
    /// (ΣΣ‖w_i − w_j‖⁴)^{1/2}, a bound on the Frobenius norm of ∂Σ/∂y.
    pub d_bar_frobenius: f64,
    /// log of the uniform bound on |∂κ/∂y|.
    pub log_kappa_derivative: f64,
}

impl TheoryConstants {
    /// log(γ²/4 · C₀² c₀⁴ / c₁²).
    pub fn log_coupling_level(&self, gamma: f64) -> f64 {
        2.0 * gamma.ln() - 4f64.ln() + 2.0 * self.log_target_lower + 4.0 * self.log_q_lower - 2.0 * self.log_q_upper
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn gp_theory_constants(data: &GPData) -> Result<TheoryConstants> {
    let n = data.n() as f64;
    let (a, b) = (data.a, data.b);
    let zz = data.z().norm_squared();
    let log_target_lower = -0.5 * (n + a) * (b + zz).ln() - 0.5 * n * (1.0 + n).ln();
    let log_target_upper = -0.5 * (n + a) * (b + zz / (1.0 + n)).ln();
    let s = data.interval;
    let mid = s.lo + 0.5 * s.len();
    // Extremes of the wrapped density: zero displacement and the antipode.
    let q_max = wrapped_gaussian_logdensity(mid, mid, data.v, &s)?;
    let q_min_printed = -0.5 * (2.0 * std::f64::consts::PI * data.v).ln() - (0.5 * s.len()).powi(2) / (2.0 * data.v);
    let d2: f64 = data.sq_dist().iter().sum();
    let d4: f64 = data.sq_dist().iter().map(|d| d * d).sum();
    let d_bar = d2.sqrt();
    let log_a = ((a + n) / 2.0).ln() + d_bar.ln() + zz.ln();
    let log_b = 0.5 * n * 2f64.ln() + n.ln() + d_bar.ln();
    let log_kappa_derivative =
        0.5 * n * 2f64.ln() + 0.5 * (a + n) * (b + zz).ln() - 0.5 * (a + n + 2.0) * b.ln() + log_add(log_a, log_b);
    Ok(TheoryConstants {
        log_target_lower,
        log_target_upper,
        log_q_lower: -log_target_upper + q_min_printed,
        log_q_upper: -log_target_lower + q_max,
        d_bar,
        d_bar_frobenius: d4.sqrt(),
        log_kappa_derivative,
    })
}
