//! Closed-form perturbation bounds. Pure arithmetic, no sampling.

use std::fmt::Write as _;

use crate::error::{param, Error, Result};

/// One-step kernel error budget ε(1 + δV(x)).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproximationBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl ApproximationBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        nonneg("epsilon", epsilon)?;
        nonneg("delta", delta)?;
        Ok(Self { epsilon, delta })
    }

    pub fn at(&self, vx: f64) -> f64 {
        self.epsilon * (1.0 + self.delta * vx)
    }
}

fn nonneg(name: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(param(format!("{name} must be finite and nonnegative, got {x}")))
    }
}

fn rate(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(param(format!("{name} must lie in (0,1), got {x}")))
    }
}

fn rate0(name: &str, x: f64) -> Result<()> {
    if (0.0..1.0).contains(&x) {
        Ok(())
    } else {
        Err(param(format!("{name} must lie in [0,1), got {x}")))
    }
}

/// Evaluated bound with its inputs echoed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundReport {
    pub kind: String,
    pub inputs: Vec<(String, f64)>,
    pub values: Vec<(String, f64)>,
    pub curve: Vec<(usize, f64)>,
    pub flags: Vec<(String, bool)>,
}

impl BoundReport {
    pub fn new(kind: impl Into<String>) -> Self {
        Self { kind: kind.into(), ..Default::default() }
    }

    pub fn input(mut self, k: &str, v: f64) -> Self {
        self.inputs.push((k.into(), v));
        self
    }

    pub fn value(mut self, k: &str, v: f64) -> Self {
        self.values.push((k.into(), v));
        self
    }

    pub fn flag(mut self, k: &str, v: bool) -> Self {
        self.flags.push((k.into(), v));
        self
    }

    pub fn get(&self, k: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == k).map(|(_, v)| *v)
    }

    pub fn csv_header() -> &'static str {
        "kind,section,name,n,value"
    }

    pub fn to_csv_rows(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, v) in &self.inputs {
            out.push(format!("{},input,{k},,{v}", self.kind));
        }
        for (k, v) in &self.values {
            out.push(format!("{},value,{k},,{v}", self.kind));
        }
        for (n, v) in &self.curve {
            out.push(format!("{},curve,value,{n},{v}", self.kind));
        }
        for (k, v) in &self.flags {
            out.push(format!("{},flag,{k},,{}", self.kind, u8::from(*v)));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("[{}]\n", self.kind);
        for (k, v) in &self.inputs {
            let _ = writeln!(s, "  input  {k} = {v}");
        }
        for (k, v) in &self.values {
            let _ = writeln!(s, "  value  {k} = {v}");
        }
        for (k, v) in &self.flags {
            let _ = writeln!(s, "  flag   {k} = {v}");
        }
        if !self.curve.is_empty() {
            let _ = writeln!(s, "  curve  {} points, n = {}..{}", self.curve.len(), self.curve[0].0, self.curve[self.curve.len() - 1].0);
        }
        s
    }
}

/// ε(1 + δV(x)) + ᾱ d_β(x, y).
pub fn perturb_one_step(eps: f64, delta: f64, v_x: f64, alpha_bar: f64, d_xy: f64) -> Result<f64> {
    rate("alpha_bar", alpha_bar)?;
    nonneg("epsilon", eps)?;
    nonneg("delta", delta)?;
    nonneg("V(x)", v_x)?;
    nonneg("d(x,y)", d_xy)?;
    Ok(eps * (1.0 + delta * v_x) + alpha_bar * d_xy)
}

/// ε/(1−ᾱ)·(1 + δm), with m either μ_εV or K_ε/(1−γ_ε).
pub fn invariant_gap(eps: f64, alpha_bar: f64, delta: f64, m: f64) -> Result<f64> {
    rate0("alpha_bar", alpha_bar)?;
    nonneg("epsilon", eps)?;
    nonneg("delta", delta)?;
    nonneg("moment", m)?;
    Ok(eps / (1.0 - alpha_bar) * (1.0 + delta * m))
}

pub fn invariant_gap_lyapunov(eps: f64, alpha_bar: f64, delta: f64, k_eps: f64, gamma_eps: f64) -> Result<f64> {
    rate("gamma_eps", gamma_eps)?;
    invariant_gap(eps, alpha_bar, delta, k_eps / (1.0 - gamma_eps))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteTimeCurve {
    /// Entry n−1 holds the bound at n using μP_ε^{k−1}V ≤ γ_ε^{k−1}μV + K_ε(1−γ_ε^{k−1})/(1−γ_ε) inside the sum.
    pub sum_form: Vec<f64>,
    /// Entry n−1 holds ε/(1−ᾱ)(1+δK_ε/(1−γ_ε)) + εδ(μV)(ᾱ∨γ_ε)^{n−1}n + ᾱⁿd₀.
    pub closed_form: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn finite_time_curve(
    n_max: usize,
    eps: f64,
    delta: f64,
    alpha_bar: f64,
    gamma_eps: f64,
    k_eps: f64,
    mu_v: f64,
    d0: f64,
) -> Result<FiniteTimeCurve> {
    rate0("alpha_bar", alpha_bar)?;
    rate("gamma_eps", gamma_eps)?;
    for (n, x) in [("epsilon", eps), ("delta", delta), ("K_eps", k_eps), ("muV", mu_v), ("d0", d0)] {
        nonneg(n, x)?;
    }
    let stat = k_eps / (1.0 - gamma_eps);
    let r = alpha_bar.max(gamma_eps);
    let mut sum_form = Vec::with_capacity(n_max);
    let mut closed_form = Vec::with_capacity(n_max);
    let mut s = 0.0;
    for n in 1..=n_max {
        let g = gamma_eps.powi(n as i32 - 1);
        let moment = g * mu_v + k_eps * (1.0 - g) / (1.0 - gamma_eps);
        s = alpha_bar * s + (1.0 + delta * moment);
        let an = alpha_bar.powi(n as i32);
        sum_form.push(eps * s + an * d0);
        closed_form.push(
            eps / (1.0 - alpha_bar) * (1.0 + delta * stat) + eps * delta * mu_v * r.powi(n as i32 - 1) * n as f64 + an * d0,
        );
    }
    Ok(FiniteTimeCurve { sum_form, closed_form })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarrisEps {
    pub gamma_eps: f64,
    pub k_eps: f64,
    pub minorization: f64,
    pub radius: f64,
    pub drift_valid: bool,
    pub minorization_valid: bool,
}

impl HarrisEps {
    pub fn report(&self) -> BoundReport {
        BoundReport::new("harris_eps")
            .value("gamma_eps", self.gamma_eps)
            .value("K_eps", self.k_eps)
            .value("minorization_level", self.minorization)
            .value("sublevel_radius", self.radius)
            .flag("eps_delta_below_gap", self.drift_valid)
            .flag("zeta_below_gap", self.minorization_valid)
    }
}

/// Drift and minorization constants inherited by the approximating kernel.
pub fn harris_eps_constants(gamma: f64, k: f64, eps: f64, delta: f64, alpha0_bar: f64, zeta: f64) -> HarrisEps {
    let gamma_eps = gamma + eps * delta;
    let k_eps = k + eps;
    let drift_valid = eps * delta < 1.0 - gamma;
    let radius = if gamma_eps < 1.0 { 2.0 * k_eps / (1.0 - gamma_eps) } else { f64::INFINITY };
    HarrisEps {
        gamma_eps,
        k_eps,
        minorization: 2.0 * (alpha0_bar + zeta),
        radius,
        drift_valid,
        minorization_valid: zeta < 1.0 - alpha0_bar,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MseBound {
    pub c: f64,
    pub c0: f64,
    pub c0_exact: f64,
    pub c1: f64,
    pub martingale: f64,
    pub perturbation: f64,
    pub boundary: f64,
    pub total: f64,
    pub leading: f64,
}

impl MseBound {
    pub fn report(&self) -> BoundReport {
        BoundReport::new("mse")
            .value("C", self.c)
            .value("c0", self.c0)
            .value("c0_exact", self.c0_exact)
            .value("c1", self.c1)
            .value("martingale", self.martingale)
            .value("perturbation", self.perturbation)
            .value("boundary", self.boundary)
            .value("total", self.total)
            .value("leading", self.leading)
    }
}

/// Mean squared error bound for time averages of |φ| < √V under the approximating chain,
/// with every O(1/n²) term kept.
#[allow(clippy::too_many_arguments)]
pub fn mse_bound(
    n: usize,
    eps: f64,
    delta: f64,
    gamma_eps: f64,
    k_eps: f64,
    alpha_half_bar: f64,
    mu_sqrt_v: f64,
    v_x0: f64,
) -> Result<MseBound> {
    if n == 0 {
        return Err(param("n must be positive"));
    }
    rate("gamma_eps", gamma_eps)?;
    rate0("alpha_half_bar", alpha_half_bar)?;
    for (name, x) in [("epsilon", eps), ("delta", delta), ("K_eps", k_eps), ("mu sqrt V", mu_sqrt_v), ("V(x0)", v_x0)] {
        nonneg(name, x)?;
    }
    let nf = n as f64;
    let c = mu_sqrt_v.max(1.0) / (1.0 - alpha_half_bar);
    let c2 = c * c;
    let sg = gamma_eps.sqrt();
    let g_n = gamma_eps.powi(n as i32);
    let stat = k_eps / (1.0 - gamma_eps);
    let c0 = 2.0 + 5.0 * delta.max(delta.sqrt()) * k_eps.max(k_eps.sqrt()) / (1.0 - sg).powi(2);
    let c0_exact = 2.0
        + 2.0 * delta * stat
        + (1.0 + delta.sqrt()) * (delta * k_eps).sqrt() / (1.0 - sg)
        + delta * k_eps / (1.0 - sg).powi(2);
    let c1 = 2.0 + k_eps.sqrt() / (1.0 - sg);
    let martingale = 6.0 * c2 * (1.0 / nf + stat / nf + (1.0 - g_n) * v_x0 / (nf * nf * (1.0 - gamma_eps)));
    let perturbation = 3.0 * c2 * eps * (c0 + delta * c1 * v_x0 / (nf * (1.0 - sg)));
    let boundary = 12.0 * c2 / (nf * nf) * (1.0 + (1.0 + g_n) * v_x0 + stat);
    let leading = 3.0 * c2 * eps * c0 + 3.0 * c2 / nf * (2.0 + 2.0 * stat + eps * delta * c1 * v_x0 / (1.0 - sg));
    Ok(MseBound { c, c0, c0_exact, c1, martingale, perturbation, boundary, total: martingale + perturbation + boundary, leading })
}

/// Total variation budget εγV(x)/(2M) + ε/(4M) that yields the weighted error condition.
pub fn adaptive_tv_budget(eps: f64, gamma: f64, v_x: f64, m_eps_x: f64) -> Result<f64> {
    if !(m_eps_x > 0.0) {
        return Err(param(format!("tail threshold M must be positive, got {m_eps_x}")));
    }
    nonneg("epsilon", eps)?;
    Ok(eps * gamma * v_x / (2.0 * m_eps_x) + eps / (4.0 * m_eps_x))
}

fn tail_mass(sorted: &[f64], suffix: &[f64], m: f64) -> f64 {
    let idx = sorted.partition_point(|v| *v <= m);
    suffix[idx] / sorted.len() as f64
}

/// Smallest candidate M whose estimated tail E[V·1{V > M}] is below ε/4 under both kernels.
/// `v_p` and `v_q` are V evaluated at draws from P(x,·) and P_ε(x,·). A known bound on V short-circuits.
pub fn tail_threshold(v_p: &[f64], v_q: &[f64], eps: f64, v_sup: Option<f64>) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(param("epsilon must be positive"));
    }
    if let Some(b) = v_sup {
        if !(b > 0.0) {
            return Err(param("V bound must be positive"));
        }
        return Ok(b);
    }
    if v_p.is_empty() || v_q.is_empty() {
        return Err(Error::Empty("tail threshold needs samples from both kernels".into()));
    }
    let prep = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let mut suf = vec![0.0; s.len() + 1];
        for i in (0..s.len()).rev() {
            suf[i] = suf[i + 1] + s[i];
        }
        (s, suf)
    };
    let (sp, fp) = prep(v_p);
    let (sq, fq) = prep(v_q);
    let mut cands: Vec<f64> = sp.iter().chain(&sq).copied().filter(|v| *v > 0.0).collect();
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    for m in cands {
        if tail_mass(&sp, &fp, m) < eps / 4.0 && tail_mass(&sq, &fq, m) < eps / 4.0 {
            return Ok(m);
        }
    }
    Err(param("no positive threshold found"))
}

/// Overall capped-W1 contraction factor max(1 − (1 − γ/δ)α_γ, Cδ).
pub fn uniform_w1_alpha(c_lip: f64, delta_scale: f64, gamma_ball: f64, alpha_gamma: f64) -> Result<f64> {
    nonneg("C", c_lip)?;
    if !(delta_scale > 0.0) {
        return Err(param("delta scale must be positive"));
    }
    let cd = c_lip * delta_scale;
    if cd >= 1.0 {
        return Err(Error::NoContraction(format!("C*delta = {cd} >= 1")));
    }
    if !(gamma_ball >= 0.0 && gamma_ball < delta_scale) {
        return Err(param(format!("ball radius {gamma_ball} must lie in [0, delta)")));
    }
    if !(alpha_gamma > 0.0 && alpha_gamma <= 1.0) {
        return Err(param(format!("coupling mass must lie in (0,1], got {alpha_gamma}")));
    }
    let far = 1.0 - (1.0 - gamma_ball / delta_scale) * alpha_gamma;
    Ok(far.max(cd))
}

/// (1/n)·2/(1−ᾱ) + ε/(1−ᾱ).
pub fn w1_time_avg_bound(n: usize, eps: f64, alpha_bar: f64) -> Result<f64> {
    rate0("alpha_bar", alpha_bar)?;
    nonneg("epsilon", eps)?;
    if n == 0 {
        return Err(param("n must be positive"));
    }
    Ok(2.0 / (n as f64 * (1.0 - alpha_bar)) + eps / (1.0 - alpha_bar))
}

/// β = α/(2(K+γR)) ∧ (1/(2K))(1/ᾱ₀ − 1).
pub fn semimetric_beta(alpha_small: f64, k: f64, gamma: f64, r: f64, alpha0_bar: f64) -> Result<f64> {
    rate("alpha", alpha_small)?;
    rate("alpha0_bar", alpha0_bar)?;
    nonneg("K", k)?;
    let first = alpha_small / (2.0 * (k + gamma * r));
    let second = if k > 0.0 { (1.0 / alpha0_bar - 1.0) / (2.0 * k) } else { f64::INFINITY };
    Ok(first.min(second))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakHarris {
    pub beta: f64,
    pub alpha_bar: f64,
    /// Squared-semimetric factors: far pairs with large V, near pairs, far pairs in the sublevel set.
    pub branches: [f64; 3],
}

/// β from the three-case argument and the resulting one-step factor for d̃_β.
pub fn weak_harris_beta(
    gamma: f64,
    k: f64,
    alpha0_bar: f64,
    alpha_small: f64,
    r: f64,
    gamma_bar: Option<f64>,
) -> Result<WeakHarris> {
    rate("gamma", gamma)?;
    let gb = gamma_bar.unwrap_or(1.0);
    if !(gb > gamma && gb <= 1.0) {
        return Err(param(format!("gamma_bar must lie in (gamma, 1], got {gb}")));
    }
    let min_r = 2.0 * k / (gb - gamma);
    if !(r > min_r) {
        return Err(Error::RadiusTooSmall { r, min: min_r });
    }
    let beta = semimetric_beta(alpha_small, k, gamma, r, alpha0_bar)?;
    let a1 = (2.0 + 2.0 * beta * k + beta * gamma * r) / (2.0 + beta * r);
    let a2 = alpha0_bar * (1.0 + beta * k);
    let a3 = (1.0 - alpha_small) * (1.0 + beta * k + beta * gamma * r / 2.0);
    let m = a1.max(a2).max(a3);
    if m >= 1.0 {
        return Err(Error::NoContraction(format!("largest squared branch factor {m} >= 1")));
    }
    Ok(WeakHarris { beta, alpha_bar: m.sqrt(), branches: [a1, a2, a3] })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakTriangle {
    pub c_n: f64,
    pub v_tilde: f64,
    pub n_step: f64,
    pub n_min: usize,
    pub n_used: usize,
    pub invariant: f64,
}

/// c(n) = Σ_{j=1}^n C^j ᾱ^{j−1}.
pub fn weak_triangle_c(c: f64, alpha_bar: f64, n: usize) -> f64 {
    (1..=n).map(|j| c.powi(j as i32) * alpha_bar.powi(j as i32 - 1)).sum()
}

/// n-step and invariant-measure bounds for a semimetric with weak triangle constant C.
/// `v` is V(x) for the n-step bound; the invariant bound uses `mu_eps_v` in place of V.
#[allow(clippy::too_many_arguments)]
pub fn weak_triangle_bounds(
    c: f64,
    alpha_bar: f64,
    eps: f64,
    delta: f64,
    n: usize,
    k_eps: f64,
    gamma_eps: f64,
    v: f64,
    mu_eps_v: f64,
    d_xy: f64,
    n_max: usize,
) -> Result<WeakTriangle> {
    if !(c >= 1.0) {
        return Err(param(format!("weak triangle constant must be at least 1, got {c}")));
    }
    rate0("alpha_bar", alpha_bar)?;
    rate("gamma_eps", gamma_eps)?;
    if n == 0 {
        return Err(param("n must be positive"));
    }
    let n_min = (1..=n_max)
        .find(|m| c * alpha_bar.powi(*m as i32) < 1.0)
        .ok_or_else(|| Error::NoContraction(format!("C*alpha^n >= 1 for every n <= {n_max}")))?;
    let stat = k_eps / (1.0 - gamma_eps);
    let c_n = weak_triangle_c(c, alpha_bar, n);
    let v_tilde = v + stat;
    let n_step = c * alpha_bar.powi(n as i32) * d_xy + eps * c * c_n * (1.0 + delta * v_tilde);
    let n_used = if c * alpha_bar.powi(n as i32) < 1.0 { n } else { n_min };
    let cu = weak_triangle_c(c, alpha_bar, n_used);
    let invariant = c * eps * cu / (1.0 - c * alpha_bar.powi(n_used as i32)) * (1.0 + delta * (mu_eps_v + stat));
    Ok(WeakTriangle { c_n, v_tilde, n_step, n_min, n_used, invariant })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn one_step() {
        assert_eq!(perturb_one_step(0.0, 1.0, 3.0, 0.5, 0.0).unwrap(), 0.0);
        assert!(close(perturb_one_step(0.1, 1.0, 3.0, 0.5, 2.0).unwrap(), 1.4));
        assert!(close(perturb_one_step(0.1, 0.0, 3.0, 0.5, 2.0).unwrap(), 1.1));
        assert!(perturb_one_step(0.1, 0.0, 3.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn invariant_gap_examples() {
        assert_eq!(invariant_gap(0.0, 0.9, 1.0, 1.0).unwrap(), 0.0);
        assert!(close(invariant_gap(0.01, 0.9, 0.0, 0.0).unwrap(), 0.1));
        assert!(close(invariant_gap_lyapunov(0.01, 0.9, 2.0, 1.0, 0.5).unwrap(), 0.5));
        assert!(invariant_gap(0.01, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn finite_time_consistency() {
        let c = finite_time_curve(1, 0.05, 0.0, 0.7, 0.5, 1.0, 2.0, 3.0).unwrap();
        let one = perturb_one_step(0.05, 0.0, 0.0, 0.7, 3.0).unwrap();
        assert!(close(c.sum_form[0], one));
        let c = finite_time_curve(400, 0.05, 0.3, 0.7, 0.5, 1.0, 2.0, 3.0).unwrap();
        let lim = invariant_gap_lyapunov(0.05, 0.7, 0.3, 1.0, 0.5).unwrap();
        assert!((c.closed_form[399] - lim).abs() < 1e-10);
        assert!((c.sum_form[399] - lim).abs() < 1e-10);
        let mix = finite_time_curve(5, 0.0, 0.3, 0.7, 0.5, 1.0, 2.0, 3.0).unwrap();
        for (i, v) in mix.closed_form.iter().enumerate() {
            assert!(close(*v, 0.7f64.powi(i as i32 + 1) * 3.0));
        }
        for (s, c) in c.sum_form.iter().zip(&c.closed_form) {
            assert!(s <= &(c + 1e-12));
        }
    }

    #[test]
    fn harris_examples() {
        let h = harris_eps_constants(0.9, 1.0, 0.0, 1.0, 0.3, 0.0);
        assert_eq!((h.gamma_eps, h.k_eps, h.minorization), (0.9, 1.0, 0.6));
        let h = harris_eps_constants(0.9, 1.0, 0.05, 1.0, 0.3, 0.1);
        assert!(h.drift_valid && close(h.gamma_eps, 0.95) && close(h.k_eps, 1.05));
        let h = harris_eps_constants(0.75, 1.0, 0.25, 1.0, 0.3, 0.1);
        assert!(!h.drift_valid);
    }

    #[test]
    fn mse_constants() {
        let m = mse_bound(10, 0.1, 1.0, 0.25, 1.0, 0.5, 1.0, 1.0).unwrap();
        assert!(close(m.c1, 4.0));
        assert!(m.c0 >= m.c0_exact);
        let z = mse_bound(1_000_000, 0.0, 1.0, 0.25, 1.0, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(z.perturbation, 0.0);
        assert!(z.total < 1e-4);
    }

    #[test]
    fn tv_budget() {
        assert!(close(adaptive_tv_budget(0.1, 0.5, 2.0, 10.0).unwrap(), 0.0075));
        assert_eq!(adaptive_tv_budget(0.0, 0.5, 2.0, 10.0).unwrap(), 0.0);
        assert!(adaptive_tv_budget(0.1, 0.5, 2.0, 0.0).is_err());
    }

    #[test]
    fn tail_threshold_picks_smallest() {
        let p = [1.0, 2.0, 3.0, 100.0];
        let q = [1.0, 2.0, 3.0, 4.0];
        let m = tail_threshold(&p, &q, 0.4, None).unwrap();
        assert_eq!(m, 100.0);
        let m = tail_threshold(&q, &q, 4.4, None).unwrap();
        assert_eq!(m, 3.0);
        assert_eq!(tail_threshold(&[], &[], 0.1, Some(7.0)).unwrap(), 7.0);
    }

    #[test]
    fn w1_alpha() {
        assert!(close(uniform_w1_alpha(0.6, 1.0, 0.5, 0.5).unwrap(), 0.75));
        assert!(close(uniform_w1_alpha(0.6, 1.0, 0.0, 1.0).unwrap(), 0.6));
        assert!(matches!(uniform_w1_alpha(1.0, 1.0, 0.5, 0.5), Err(Error::NoContraction(_))));
    }

    #[test]
    fn w1_time_avg() {
        assert!(close(w1_time_avg_bound(4, 0.0, 0.5).unwrap(), 1.0));
        assert!((w1_time_avg_bound(100_000_000, 0.1, 0.5).unwrap() - 0.2).abs() < 1e-7);
    }

    #[test]
    fn weak_harris_example() {
        let b = semimetric_beta(0.5, 1.0, 0.5, 4.0, 0.5).unwrap();
        assert!(close(b, 1.0 / 12.0));
        assert!(matches!(weak_harris_beta(0.5, 1.0, 0.5, 0.5, 4.0, None), Err(Error::RadiusTooSmall { .. })));
        let w = weak_harris_beta(0.5, 1.0, 0.5, 0.5, 5.0, None).unwrap();
        assert!(close(w.beta, 0.5 / 7.0));
        assert!(w.alpha_bar < 1.0);
        let b = semimetric_beta(0.5, 1.0, 0.5, 4.0, 1.0 - 1e-9).unwrap();
        assert!(b < 1e-8);
    }

    #[test]
    fn weak_triangle_examples() {
        assert!(close(weak_triangle_c(1.0, 0.5, 3), 1.75));
        let w = weak_triangle_bounds(2.0, 0.5, 0.1, 0.0, 1, 1.0, 0.5, 0.0, 0.0, 1.0, 50).unwrap();
        assert_eq!(w.n_min, 2);
        assert_eq!(w.n_used, 2);
        let w = weak_triangle_bounds(1.0, 0.5, 0.1, 0.0, 3, 1.0, 0.5, 0.0, 0.0, 1.0, 50).unwrap();
        assert!(close(w.invariant, 0.1 * 1.75 / (1.0 - 0.125)));
        assert!(weak_triangle_bounds(3.0, 0.99, 0.1, 0.0, 1, 1.0, 0.5, 0.0, 0.0, 1.0, 10).is_err());
    }
}
