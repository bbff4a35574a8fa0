//! Every bound of the bound engine checked against exact quantities on small chain pairs.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{contraction_with, drift_exact, exact_time_avg_mse, stationary_exact, ChainMetric, FiniteChain};
use crate::bounds::{
    finite_time_curve, harris_eps_constants, invariant_gap, invariant_gap_lyapunov, mse_bound, perturb_one_step,
    uniform_w1_alpha, w1_time_avg_bound, weak_harris_beta, weak_triangle_bounds,
};
use crate::error::{param, Result};
use crate::metrics::MetricKind;
use crate::rng::RandomSource;

pub const AUDIT_TOL: f64 = 1e-8;
const BETAS: [f64; 6] = [1.0, 0.5, 0.25, 0.1, 0.05, 0.01];
const WEAK_TRIANGLE_STEPS: [usize; 9] = [1, 2, 3, 5, 8, 12, 20, 30, 50];

#[derive(Clone, Debug, PartialEq)]
pub struct ChainPair {
    pub seed: u64,
    pub p: FiniteChain,
    pub p_eps: FiniteChain,
    /// Lyapunov coefficient in the one-step error condition.
    pub delta: f64,
    /// Scale of the capped distance 1 ∧ |x−y|/δ.
    pub delta_scale: f64,
}

impl ChainPair {
    pub fn new(seed: u64, p: FiniteChain, p_eps: FiniteChain, delta: f64, delta_scale: f64) -> Result<Self> {
        if p.states != p_eps.states || p.v != p_eps.v {
            return Err(param("chains must share states and V"));
        }
        if p.v.is_none() {
            return Err(param("audit needs V on the states"));
        }
        if !(delta >= 0.0 && delta_scale > 0.0) {
            return Err(param("need delta >= 0 and delta_scale > 0"));
        }
        Ok(Self { seed, p, p_eps, delta, delta_scale })
    }
}

fn normalize(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
}

fn local_row(pos: &[f64], center: f64, sigma: f64, floor: f64) -> Vec<f64> {
    let mut w: Vec<f64> = pos.iter().map(|s| (-(s - center).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    normalize(&mut w);
    let n = pos.len() as f64;
    w.iter().map(|x| (1.0 - floor) * x + floor / n).collect()
}

/// A contracting chain on 3–10 scalar states with V = a·s², and a mixture perturbation of it.
pub fn random_chain_pair(seed: u64) -> Result<ChainPair> {
    let mut rng = RandomSource::new(seed, 0);
    let n = 3 + rng.index(8);
    let mut pos = vec![0.0];
    for _ in 1..n {
        let last = *pos.last().unwrap();
        pos.push(last + 0.3 + 0.9 * rng.uniform());
    }
    let mean = pos.iter().sum::<f64>() / n as f64;
    pos.iter_mut().for_each(|s| *s -= mean);
    let spacing = (pos[n - 1] - pos[0]) / (n - 1) as f64;
    let a = 0.5 + 1.5 * rng.uniform();
    let v: Vec<f64> = pos.iter().map(|s| a * s * s).collect();
    let rho = 0.2 + 0.6 * rng.uniform();
    let sigma = (0.5 + rng.uniform()) * spacing;
    let floor = 0.02 + 0.18 * rng.uniform();
    let rows: Vec<Vec<f64>> = pos.iter().map(|s| local_row(&pos, rho * s, sigma, floor)).collect();
    let t = 10f64.powf(-3.0 + 2.0 * rng.uniform());
    let shift = (rng.uniform() - 0.5) * spacing;
    let random_q = rng.uniform() < 0.5;
    let q_rows: Vec<Vec<f64>> = pos
        .iter()
        .map(|s| {
            if random_q {
                let mut w: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
                normalize(&mut w);
                w
            } else {
                local_row(&pos, rho * s + shift, sigma, floor)
            }
        })
        .collect();
    let p = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let pe = DMatrix::from_fn(n, n, |i, j| (1.0 - t) * rows[i][j] + t * q_rows[i][j]);
    let delta = [0.0, 0.5, 1.0, 2.0][rng.index(4)];
    let delta_scale = (0.5 + 1.5 * rng.uniform()) * spacing;
    let p = FiniteChain::new(pos.clone(), renormalized(p), Some(v.clone()))?;
    let p_eps = FiniteChain::new(pos, renormalized(pe), Some(v))?;
    ChainPair::new(seed, p, p_eps, delta, delta_scale)
}

fn renormalized(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for i in 0..m.nrows() {
        let s: f64 = m.row(i).iter().sum();
        m.row_mut(i).iter_mut().for_each(|x| *x /= s);
    }
    m
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditConfig {
    pub n_max: usize,
    pub n_max_mse: usize,
    /// Multiplies every measured ε; values below one understate the error.
    pub eps_scale: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self { n_max: 100, n_max_mse: 50, eps_scale: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditRow {
    pub bound_id: String,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditReport {
    pub seed: u64,
    pub rows: Vec<AuditRow>,
    /// Bounds whose hypotheses failed on this pair, with the reason.
    pub skipped: Vec<(String, String)>,
    pub constants: Vec<(String, f64)>,
}

impl AuditReport {
    pub fn violations(&self) -> Vec<&AuditRow> {
        self.rows.iter().filter(|r| !r.pass).collect()
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn csv_header() -> &'static str {
        "bound_id,n,lhs,rhs,margin,pass"
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.12e},{:.12e},{:.12e},{}\n", r.bound_id, r.n, r.lhs, r.rhs, r.margin, r.pass));
        }
        out
    }

    fn push(&mut self, id: &str, n: usize, lhs: f64, rhs: f64) {
        let margin = rhs - lhs;
        self.rows.push(AuditRow { bound_id: id.to_string(), n, lhs, rhs, margin, pass: margin >= -AUDIT_TOL });
    }

    /// Keeps the worst (lhs, rhs) pair.
    fn push_worst(&mut self, id: &str, n: usize, pairs: impl IntoIterator<Item = (f64, f64)>) {
        let worst = pairs.into_iter().min_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)));
        if let Some((l, r)) = worst {
            self.push(id, n, l, r);
        }
    }

    fn skip(&mut self, id: &str, why: impl ToString) {
        self.skipped.push((id.to_string(), why.to_string()));
    }

    fn constant(&mut self, name: &str, v: f64) {
        self.constants.push((name.to_string(), v));
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dirichlet(n: usize, rng: &mut RandomSource) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.exp1()).collect();
    normalize(&mut w);
    w
}

struct Ctx<'a> {
    pair: &'a ChainPair,
    pos: &'a [f64],
    v: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rows_e: Vec<Vec<f64>>,
    mu0: Vec<f64>,
    mue: Vec<f64>,
    n: usize,
}

impl Ctx<'_> {
    fn dist(&self, m: ChainMetric, a: &[f64], b: &[f64]) -> Result<f64> {
        m.distance(self.pos, &self.v, a, b)
    }
}

/// Audits every implemented bound on one chain pair.
pub fn bound_audit(pair: &ChainPair, cfg: &AuditConfig) -> Result<AuditReport> {
    let n = pair.p.len();
    let ctx = Ctx {
        pair,
        pos: &pair.p.states,
        v: pair.p.v_or_zero(),
        rows: (0..n).map(|i| pair.p.row(i)).collect(),
        rows_e: (0..n).map(|i| pair.p_eps.row(i)).collect(),
        mu0: stationary_exact(&pair.p)?,
        mue: stationary_exact(&pair.p_eps)?,
        n,
    };
    let mut rep = AuditReport { seed: pair.seed, ..Default::default() };
    let mut rng = RandomSource::new(pair.seed, 7);
    weighted_tv_family(&ctx, cfg, &mut rep, &mut rng)?;
    wasserstein_family(&ctx, cfg, &mut rep, &mut rng)?;
    semimetric_family(&ctx, cfg, &mut rep)?;
    Ok(rep)
}

/// Audits many random pairs in parallel; the output order follows `seeds`.
pub fn bound_audit_many(seeds: &[u64], cfg: &AuditConfig) -> Result<Vec<AuditReport>> {
    seeds.par_iter().map(|&s| bound_audit(&random_chain_pair(s)?, cfg)).collect()
}

fn weighted_tv_family(c: &Ctx, cfg: &AuditConfig, rep: &mut AuditReport, rng: &mut RandomSource) -> Result<()> {
    let pair = c.pair;
    let delta = pair.delta;
    let v = &c.v;
    let n = c.n;
    let w1 = ChainMetric::new(MetricKind::WeightedTv, 1.0, 1.0);
    let eps = (0..n)
        .map(|x| c.dist(w1, &c.rows[x], &c.rows_e[x]).map(|d| d / (1.0 + delta * v[x])))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max)
        * cfg.eps_scale;
    rep.constant("eps_weighted", eps);

    let fp = drift_exact(&pair.p, v)?;
    let (gamma, k) = fp.best_stationary();
    let fe = drift_exact(&pair.p_eps, v)?;
    let (ge, ke) = fe.best_stationary();
    rep.constant("gamma", gamma);
    rep.constant("K", k);
    rep.constant("gamma_eps", ge);
    rep.constant("K_eps", ke);

    let mut best = (f64::INFINITY, 1.0);
    for b in BETAS {
        let a = contraction_with(&pair.p, ChainMetric::new(MetricKind::WeightedTv, b, 1.0), v)?;
        if a < best.0 {
            best = (a, b);
        }
    }
    let (abar, beta) = best;
    rep.constant("beta", beta);
    rep.constant("alpha_bar", abar);
    let wb = ChainMetric::new(MetricKind::WeightedTv, beta, 1.0);

    harris_perturbed_drift(c, rep, eps, gamma, k)?;
    mse_audit(c, cfg, rep, rng, eps, ge, ke)?;

    if abar >= 1.0 {
        rep.skip("weighted_tv", format!("no contraction in rho_beta (alpha_bar = {abar})"));
        return Ok(());
    }
    let abar = abar.max(1e-15);

    let mut pairs = Vec::with_capacity(n * n);
    for x in 0..n {
        for y in 0..n {
            let lhs = c.dist(wb, &c.rows[y], &c.rows_e[x])?;
            let rhs = perturb_one_step(eps, delta, v[x], abar, wb.point(c.pos, v, x, y))?;
            pairs.push((lhs, rhs));
        }
    }
    rep.push_worst("one_step", 1, pairs);

    let gap = c.dist(wb, &c.mue, &c.mu0)?;
    rep.push("invariant_gap_muV", 0, gap, invariant_gap(eps, abar, delta, dot(&c.mue, v))?);
    rep.push("invariant_gap_lyapunov", 0, gap, invariant_gap_lyapunov(eps, abar, delta, ke, ge)?);

    let mut mu = dirichlet(n, rng);
    let mut nu = dirichlet(n, rng);
    let d0 = c.dist(wb, &mu, &nu)?;
    let curve = finite_time_curve(cfg.n_max, eps, delta, abar, ge, ke, dot(&mu, v), d0)?;
    for step in 1..=cfg.n_max {
        mu = pair.p_eps.push(&mu);
        nu = pair.p.push(&nu);
        let lhs = c.dist(wb, &mu, &nu)?;
        rep.push("finite_time_sum", step, lhs, curve.sum_form[step - 1]);
        rep.push("finite_time_closed", step, lhs, curve.closed_form[step - 1]);
    }
    Ok(())
}

fn harris_perturbed_drift(c: &Ctx, rep: &mut AuditReport, eps: f64, gamma: f64, k: f64) -> Result<()> {
    let delta = c.pair.delta;
    let v = &c.v;
    let n = c.n;
    let pre = harris_eps_constants(gamma, k, eps, delta, 0.0, 0.0);
    let pev = c.pair.p_eps.apply(v);
    rep.push_worst("harris_drift", 1, (0..n).map(|x| (pev[x], pre.gamma_eps * v[x] + pre.k_eps)));
    if !pre.drift_valid {
        rep.skip("harris_minorization", "eps*delta >= 1 - gamma");
        return Ok(());
    }
    let set: Vec<usize> = (0..n).filter(|&x| v[x] <= pre.radius).collect();
    let tv = ChainMetric::new(MetricKind::Tv, 0.0, 1.0);
    let mut a0: f64 = 0.0;
    let mut zeta: f64 = 0.0;
    let mut lhs: f64 = 0.0;
    for &x in &set {
        zeta = zeta.max(c.dist(tv, &c.rows[x], &c.rows_e[x])?);
        for &y in &set {
            a0 = a0.max(0.5 * c.dist(tv, &c.rows[x], &c.rows[y])?);
            lhs = lhs.max(c.dist(tv, &c.rows_e[x], &c.rows_e[y])?);
        }
    }
    let h = harris_eps_constants(gamma, k, eps, delta, a0, zeta);
    rep.constant("alpha0_bar", a0);
    rep.constant("zeta", zeta);
    rep.push("harris_minorization", 1, lhs, h.minorization);
    Ok(())
}

fn mse_audit(
    c: &Ctx,
    cfg: &AuditConfig,
    rep: &mut AuditReport,
    rng: &mut RandomSource,
    eps: f64,
    ge: f64,
    ke: f64,
) -> Result<()> {
    let n = c.n;
    let sv: Vec<f64> = c.v.iter().map(|x| x.sqrt()).collect();
    let a_half = contraction_with(&c.pair.p, ChainMetric::new(MetricKind::WeightedTv, 1.0, 1.0), &sv)?;
    rep.constant("alpha_half_bar", a_half);
    if a_half >= 1.0 {
        rep.skip("mse", format!("no contraction with weight 1 + sqrt V (alpha = {a_half})"));
        return Ok(());
    }
    let phi: Vec<f64> = sv.iter().map(|s| (2.0 * rng.uniform() - 1.0) * 0.95 * s).collect();
    let center = dot(&c.mu0, &phi);
    let x0 = rng.index(n);
    let init = c.pair.p.dirac(x0);
    let mu_sqrt_v = dot(&c.mu0, &sv);
    for steps in 1..=cfg.n_max_mse {
        let lhs = exact_time_avg_mse(&c.pair.p_eps, &phi, &init, steps, Some(center))?;
        let b = mse_bound(steps, eps, c.pair.delta, ge, ke, a_half, mu_sqrt_v, c.v[x0])?;
        rep.push("mse", steps, lhs, b.total);
    }
    Ok(())
}

fn wasserstein_family(c: &Ctx, cfg: &AuditConfig, rep: &mut AuditReport, rng: &mut RandomSource) -> Result<()> {
    let pair = c.pair;
    let n = c.n;
    let ds = pair.delta_scale;
    let cm = ChainMetric::new(MetricKind::CappedW1, 0.0, ds);
    let mut w = vec![vec![0.0; n]; n];
    for x in 0..n {
        for y in (x + 1)..n {
            w[x][y] = c.dist(cm, &c.rows[x], &c.rows[y])?;
            w[y][x] = w[x][y];
        }
    }
    let eps_w = (0..n)
        .map(|x| c.dist(cm, &c.rows[x], &c.rows_e[x]))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max)
        * cfg.eps_scale;
    rep.constant("eps_w1", eps_w);

    // Uniform contraction from the Lipschitz and coupling-ball constants.
    let mut c_lip: f64 = 0.0;
    let mut min_sep = f64::INFINITY;
    let mut overlap = f64::INFINITY;
    for x in 0..n {
        for y in (x + 1)..n {
            let sep = (c.pos[x] - c.pos[y]).abs();
            min_sep = min_sep.min(sep);
            if sep < ds {
                c_lip = c_lip.max(w[x][y] / sep);
            }
            overlap = overlap.min(c.rows[x].iter().zip(&c.rows[y]).map(|(a, b)| a.min(*b)).sum());
        }
    }
    let gamma_ball = 0.5 * min_sep.min(ds);
    rep.constant("lipschitz_C", c_lip);
    match uniform_w1_alpha(c_lip, ds, gamma_ball, overlap.min(1.0)) {
        Ok(abar) => {
            rep.constant("alpha_bar_w1_uniform", abar);
            let mut pairs = Vec::new();
            let mut perturbed = Vec::new();
            for x in 0..n {
                for y in 0..n {
                    let d = cm.point(c.pos, &c.v, x, y);
                    if x != y {
                        pairs.push((w[x][y], abar * d));
                    }
                    perturbed.push((c.dist(cm, &c.rows[x], &c.rows_e[y])?, abar * d + eps_w));
                }
            }
            rep.push_worst("uniform_w1_contraction", 1, pairs);
            rep.push_worst("uniform_w1_perturbed", 1, perturbed);
        }
        Err(e) => rep.skip("uniform_w1", e),
    }

    let abar = contraction_with(&pair.p, cm, &c.v)?;
    rep.constant("alpha_bar_w1", abar);
    if abar >= 1.0 {
        rep.skip("w1_time_avg", format!("no capped-W1 contraction (alpha = {abar})"));
        return Ok(());
    }
    let anchor = rng.index(n);
    let phi: Vec<f64> = (0..n).map(|x| cm.point(c.pos, &c.v, x, anchor) - 0.5).collect();
    let mphi = dot(&c.mu0, &phi);
    let mut dist = pair.p.dirac(rng.index(n));
    let mut sum = 0.0;
    for steps in 1..=cfg.n_max {
        sum += dot(&dist, &phi) - mphi;
        dist = pair.p_eps.push(&dist);
        let bias = (sum / steps as f64).abs();
        rep.push("w1_time_avg", steps, bias, w1_time_avg_bound(steps, eps_w, abar.max(0.0))?);
    }
    Ok(())
}

fn semimetric_family(c: &Ctx, cfg: &AuditConfig, rep: &mut AuditReport) -> Result<()> {
    let pair = c.pair;
    let n = c.n;
    let v = &c.v;
    let ds = pair.delta_scale;
    let cm = ChainMetric::new(MetricKind::CappedW1, 0.0, ds);

    let mut a0: f64 = 0.0;
    let mut near = false;
    for x in 0..n {
        for y in (x + 1)..n {
            let d = cm.point(c.pos, v, x, y);
            if d < 1.0 {
                near = true;
                a0 = a0.max(c.dist(cm, &c.rows[x], &c.rows[y])? / d);
            }
        }
    }
    if !near {
        a0 = 0.5;
    }
    let fp = drift_exact(&pair.p, v)?;
    let (gamma, k) = fp.best_stationary();
    let r = 2.5 * k / (1.0 - gamma) + 1e-9;
    let mut far: f64 = 0.0;
    for x in 0..n {
        for y in (x + 1)..n {
            if v[x] <= r && v[y] <= r {
                far = far.max(c.dist(cm, &c.rows[x], &c.rows[y])?);
            }
        }
    }
    let alpha = (1.0 - far).clamp(1e-12, 1.0 - 1e-12);
    rep.constant("alpha0_bar_d", a0);
    rep.constant("alpha_small", alpha);
    let beta = if a0 < 1.0 {
        match weak_harris_beta(gamma, k, a0, alpha, r, None) {
            Ok(wh) => {
                rep.constant("beta_weak_harris", wh.beta);
                rep.constant("alpha_bar_weak_harris", wh.alpha_bar);
                let sm = ChainMetric::new(MetricKind::Semimetric, wh.beta, ds);
                let mut pairs = Vec::new();
                for x in 0..n {
                    for y in (x + 1)..n {
                        pairs.push((c.dist(sm, &c.rows[x], &c.rows[y])?, wh.alpha_bar * sm.point(c.pos, v, x, y)));
                    }
                }
                rep.push_worst("weak_harris_contraction", 1, pairs);
                wh.beta
            }
            Err(e) => {
                rep.skip("weak_harris_contraction", e);
                0.5
            }
        }
    } else {
        rep.skip("weak_harris_contraction", format!("d not contracting for near pairs (alpha0 = {a0})"));
        0.5
    };

    let sm = ChainMetric::new(MetricKind::Semimetric, beta, ds);
    let abar = contraction_with(&pair.p, sm, v)?;
    rep.constant("alpha_bar_semimetric", abar);
    if abar >= 1.0 {
        rep.skip("weak_triangle", format!("no semimetric contraction (alpha = {abar})"));
        return Ok(());
    }
    let mut cw: f64 = 1.0;
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let dxy = sm.point(c.pos, v, x, y);
            for z in 0..n {
                cw = cw.max(dxy / (sm.point(c.pos, v, x, z) + sm.point(c.pos, v, z, y)));
            }
        }
    }
    rep.constant("weak_triangle_C", cw);
    let eps = (0..n)
        .map(|x| c.dist(sm, &c.rows[x], &c.rows_e[x]).map(|d| d / (1.0 + pair.delta * v[x])))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max)
        * cfg.eps_scale;
    rep.constant("eps_semimetric", eps);
    let fe = drift_exact(&pair.p_eps, v)?;
    let (ge, ke) = fe.best_stationary();
    let mue_v = dot(&c.mue, v);

    let probe = weak_triangle_bounds(cw, abar.max(1e-15), eps, pair.delta, 1, ke, ge, 0.0, mue_v, 0.0, 10_000);
    let n_min = match probe {
        Ok(b) => b.n_min,
        Err(e) => {
            rep.skip("weak_triangle", e);
            return Ok(());
        }
    };
    let inv = weak_triangle_bounds(cw, abar.max(1e-15), eps, pair.delta, n_min, ke, ge, 0.0, mue_v, 0.0, 10_000)?;
    rep.push("weak_triangle_invariant", inv.n_used, c.dist(sm, &c.mu0, &c.mue)?, inv.invariant);

    let mut pn: Vec<Vec<f64>> = (0..n).map(|x| pair.p.dirac(x)).collect();
    let mut pe: Vec<Vec<f64>> = pn.clone();
    let mut done = 0;
    for &steps in WEAK_TRIANGLE_STEPS.iter().filter(|&&s| s <= cfg.n_max) {
        while done < steps {
            pn = pn.iter().map(|m| pair.p.push(m)).collect();
            pe = pe.iter().map(|m| pair.p_eps.push(m)).collect();
            done += 1;
        }
        let mut pairs = Vec::with_capacity(n * n);
        for x in 0..n {
            for y in 0..n {
                let b = weak_triangle_bounds(
                    cw,
                    abar.max(1e-15),
                    eps,
                    pair.delta,
                    steps,
                    ke,
                    ge,
                    v[x],
                    mue_v,
                    sm.point(c.pos, v, x, y),
                    10_000,
                )?;
                pairs.push((c.dist(sm, &pn[y], &pe[x])?, b.n_step));
            }
        }
        rep.push_worst("weak_triangle_n_step", steps, pairs);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(random_chain_pair(11).unwrap(), random_chain_pair(11).unwrap());
    }

    #[test]
    fn unperturbed_pair_has_zero_lhs() {
        let g = random_chain_pair(3).unwrap();
        let pair = ChainPair::new(3, g.p.clone(), g.p.clone(), g.delta, g.delta_scale).unwrap();
        let rep = bound_audit(&pair, &AuditConfig { n_max: 20, n_max_mse: 10, eps_scale: 1.0 }).unwrap();
        assert!(rep.passed());
        for r in rep.rows.iter().filter(|r| r.bound_id.starts_with("invariant_gap")) {
            assert!(r.lhs.abs() < 1e-12);
        }
    }

    #[test]
    fn understated_eps_is_flagged() {
        let pair = random_chain_pair(5).unwrap();
        let rep = bound_audit(&pair, &AuditConfig { n_max: 10, n_max_mse: 5, eps_scale: 0.0 }).unwrap();
        assert!(!rep.violations().is_empty());
    }
}
