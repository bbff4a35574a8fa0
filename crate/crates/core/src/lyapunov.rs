//! Foster–Lyapunov drift certificates PV ≤ γV + K.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::kernels::{simulate_path, Kernel, StateVector};
use crate::rng::RandomSource;
use crate::special::norm_ppf;

type CustomFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum LyapunovSpec {
    /// V(x) = x′Ax with A symmetric positive semidefinite.
    Quadratic(DMatrix<f64>),
    /// V(x) = c·e^{s‖x‖}.
    Exponential { c: f64, s: f64 },
    /// Per-state values, indexed by the first coordinate.
    Table(Vec<f64>),
    /// V(x) = base(x)^p.
    Power { base: Box<LyapunovSpec>, p: f64 },
    Custom { name: String, f: CustomFn },
}

impl fmt::Debug for LyapunovSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LyapunovSpec({}: {})", self.family_id(), self.params_string())
    }
}

impl LyapunovSpec {
    pub fn squared_norm(dim: usize) -> Self {
        Self::Quadratic(DMatrix::identity(dim, dim))
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom { name: name.into(), f: Arc::new(f) }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            Self::Quadratic(a) => {
                let n = a.nrows();
                let mut s = 0.0;
                for i in 0..n {
                    let mut r = 0.0;
                    for j in 0..n {
                        r += a[(i, j)] * x[j];
                    }
                    s += x[i] * r;
                }
                s.max(0.0)
            }
            Self::Exponential { c, s } => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                c * (s * norm).exp()
            }
            Self::Table(v) => v[x[0].round() as usize],
            Self::Power { base, p } => base.evaluate(x).powf(*p),
            Self::Custom { f, .. } => f(x),
        }
    }

    pub fn family_id(&self) -> &'static str {
        match self {
            Self::Quadratic(_) => "quadratic",
            Self::Exponential { .. } => "exponential",
            Self::Table(_) => "table",
            Self::Power { .. } => "power",
            Self::Custom { .. } => "custom",
        }
    }

    fn params_string(&self) -> String {
        let join = |v: &mut dyn Iterator<Item = f64>| v.map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Self::Quadratic(a) => format!("{};{}", a.nrows(), join(&mut a.iter().copied())),
            Self::Exponential { c, s } => format!("{c},{s}"),
            Self::Table(v) => join(&mut v.iter().copied()),
            Self::Power { base, p } => format!("{p};{}:{}", base.family_id(), base.params_string()),
            Self::Custom { name, .. } => name.clone(),
        }
    }

    fn parse(family: &str, params: &str) -> Result<Self> {
        let nums = |s: &str| -> Result<Vec<f64>> {
            if s.is_empty() {
                return Ok(vec![]);
            }
            s.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| param(format!("bad number '{t}'"))))
                .collect()
        };
        match family {
            "quadratic" => {
                let (n, rest) = params.split_once(';').ok_or_else(|| param("quadratic params need 'n;entries'"))?;
                let n: usize = n.trim().parse().map_err(|_| param("bad quadratic dimension"))?;
                let v = nums(rest)?;
                if v.len() != n * n {
                    return Err(Error::Dimension { expected: n * n, got: v.len() });
                }
                Ok(Self::Quadratic(DMatrix::from_column_slice(n, n, &v)))
            }
            "exponential" => match nums(params)?.as_slice() {
                [c, s] => Ok(Self::Exponential { c: *c, s: *s }),
                _ => Err(param("exponential params need 'c,s'")),
            },
            "table" => Ok(Self::Table(nums(params)?)),
            "power" => {
                let (p, rest) = params.split_once(';').ok_or_else(|| param("power params need 'p;base'"))?;
                let (fam, bp) = rest.split_once(':').ok_or_else(|| param("power base needs 'family:params'"))?;
                let p: f64 = p.trim().parse().map_err(|_| param("bad power exponent"))?;
                Ok(Self::Power { base: Box::new(Self::parse(fam, bp)?), p })
            }
            "custom" => Err(param(format!("custom Lyapunov function '{params}' cannot be rebuilt from text"))),
            other => Err(param(format!("unknown Lyapunov family '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Estimated,
    AnalyticGammaEstimatedK,
    Exact,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Analytic => "analytic",
            Self::Estimated => "estimated",
            Self::AnalyticGammaEstimatedK => "analytic-gamma/estimated-K",
            Self::Exact => "exact",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Self::Analytic),
            "estimated" => Ok(Self::Estimated),
            "analytic-gamma/estimated-K" => Ok(Self::AnalyticGammaEstimatedK),
            "exact" => Ok(Self::Exact),
            o => Err(param(format!("unknown provenance '{o}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DriftCertificate {
    pub v: LyapunovSpec,
    pub gamma: f64,
    pub k: f64,
    pub provenance: Provenance,
    pub kernel_label: String,
}

impl DriftCertificate {
    pub fn new(v: LyapunovSpec, gamma: f64, k: f64, provenance: Provenance, kernel_label: impl Into<String>) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(param(format!("gamma must lie in (0,1), got {gamma}")));
        }
        if !(k >= 0.0 && k.is_finite()) {
            return Err(param(format!("K must be finite and nonnegative, got {k}")));
        }
        Ok(Self { v, gamma, k, provenance, kernel_label: kernel_label.into() })
    }

    pub fn bound(&self, vx: f64) -> f64 {
        self.gamma * vx + self.k
    }

    pub fn to_kv(&self) -> String {
        format!(
            "family = {}\nparams = {}\ngamma = {}\nK = {}\nprovenance = {}\nkernel = {}\n",
            self.v.family_id(),
            self.v.params_string(),
            self.gamma,
            self.k,
            self.provenance.as_str(),
            self.kernel_label
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut get = std::collections::HashMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line.split_once('=').ok_or_else(|| param(format!("expected key = value, got '{line}'")))?;
            get.insert(k.trim().to_string(), v.trim().to_string());
        }
        let field = |k: &str| get.get(k).cloned().ok_or_else(|| param(format!("missing key '{k}'")));
        let num = |k: &str| -> Result<f64> { field(k)?.parse().map_err(|_| param(format!("bad number for '{k}'"))) };
        let v = LyapunovSpec::parse(&field("family")?, &field("params")?)?;
        Self::new(v, num("gamma")?, num("K")?, Provenance::parse(&field("provenance")?)?, field("kernel")?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeStat {
    pub v: f64,
    pub mean: f64,
    pub se: f64,
}

/// Monte Carlo estimates of E[V(X₁) | x] at each probe.
pub fn conditional_means<K>(
    kernel: &K,
    v: &LyapunovSpec,
    probes: &[StateVector],
    reps: usize,
    rng: &mut RandomSource,
) -> Result<Vec<ProbeStat>>
where
    K: Kernel + Sync + ?Sized,
{
    if reps < 2 {
        return Err(param("need at least two replicates per probe"));
    }
    let base = rng.next_seed();
    probes
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut r = RandomSource::new(base, i as u64);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..reps {
                let y = kernel.step(x, &mut r)?;
                let vy = v.evaluate(&y);
                s += vy;
                s2 += vy * vy;
            }
            let n = reps as f64;
            let mean = s / n;
            let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
            Ok(ProbeStat { v: v.evaluate(x), mean, se: (var / n).sqrt() })
        })
        .collect()
}

/// Least-squares line through (V, E) then K raised so the line dominates every point.
pub fn fit_drift(vs: &[f64], es: &[f64]) -> Result<(f64, f64)> {
    if vs.len() != es.len() {
        return Err(Error::Dimension { expected: vs.len(), got: es.len() });
    }
    if vs.len() < 2 {
        return Err(Error::Empty("need at least two probes".into()));
    }
    let n = vs.len() as f64;
    let mv = vs.iter().sum::<f64>() / n;
    let me = es.iter().sum::<f64>() / n;
    let sxx: f64 = vs.iter().map(|v| (v - mv).powi(2)).sum();
    let sxy: f64 = vs.iter().zip(es).map(|(v, e)| (v - mv) * (e - me)).sum();
    if sxx <= 0.0 {
        return Err(param("probes must span distinct V values"));
    }
    let slope = sxy / sxx;
    if !(slope < 1.0 - 1e-9) {
        return Err(Error::NoDrift(slope));
    }
    let gamma = slope.max(1e-12);
    let k = vs.iter().zip(es).map(|(v, e)| e - gamma * v).fold(0.0, f64::max);
    Ok((gamma, k))
}

pub fn estimate_drift<K>(
    kernel: &K,
    v: &LyapunovSpec,
    probes: &[StateVector],
    reps: usize,
    rng: &mut RandomSource,
) -> Result<DriftCertificate>
where
    K: Kernel + Sync + ?Sized,
{
    if reps < 100 {
        return Err(param(format!("reps must be at least 100, got {reps}")));
    }
    let stats = conditional_means(kernel, v, probes, reps, rng)?;
    let vs: Vec<f64> = stats.iter().map(|s| s.v).collect();
    let es: Vec<f64> = stats.iter().map(|s| s.mean).collect();
    let (gamma, k) = fit_drift(&vs, &es)?;
    DriftCertificate::new(v.clone(), gamma, k, Provenance::Estimated, kernel.label())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeCheck {
    pub v: f64,
    pub mean: f64,
    pub se: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftAudit {
    pub z: f64,
    pub checks: Vec<ProbeCheck>,
}

impl DriftAudit {
    pub fn violations(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }
}

/// One-sided confidence level matching `k` standard errors.
pub fn confidence_for_sigmas(k: f64) -> f64 {
    crate::special::norm_cdf(k)
}

pub fn audit_probe_stats(cert: &DriftCertificate, stats: &[ProbeStat], z: f64) -> DriftAudit {
    let checks = stats
        .iter()
        .map(|s| {
            let rhs = cert.bound(s.v);
            ProbeCheck { v: s.v, mean: s.mean, se: s.se, rhs, pass: s.mean <= rhs + z * s.se }
        })
        .collect();
    DriftAudit { z, checks }
}

pub fn verify_drift<K>(
    cert: &DriftCertificate,
    kernel: &K,
    probes: &[StateVector],
    reps: usize,
    confidence: f64,
    rng: &mut RandomSource,
) -> Result<DriftAudit>
where
    K: Kernel + Sync + ?Sized,
{
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(param(format!("confidence must lie in (0,1), got {confidence}")));
    }
    let stats = conditional_means(kernel, &cert.v, probes, reps, rng)?;
    Ok(audit_probe_stats(cert, &stats, norm_ppf(confidence)))
}

pub fn power_drift(cert: &DriftCertificate, p: f64) -> Result<DriftCertificate> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(param(format!("power must lie in (0,1], got {p}")));
    }
    if p == 1.0 {
        return Ok(cert.clone());
    }
    let v = LyapunovSpec::Power { base: Box::new(cert.v.clone()), p };
    let gamma = cert.gamma.powf(p).min(1.0 - f64::EPSILON);
    DriftCertificate::new(v, gamma, cert.k.powf(p), cert.provenance, cert.kernel_label.clone())
}

/// Pilot-run states plus coordinate rays reaching ten times the largest pilot V.
pub fn default_probes<K>(
    kernel: &K,
    x0: &StateVector,
    pilot_len: usize,
    keep: usize,
    v: &LyapunovSpec,
    rng: &mut RandomSource,
) -> Result<Vec<StateVector>>
where
    K: Kernel + ?Sized,
{
    let path = simulate_path(kernel, x0, pilot_len, rng)?;
    let stride = (path.len() / keep.max(1)).max(1);
    let mut probes: Vec<StateVector> = path.iter().step_by(stride).cloned().collect();
    let vmax = path.iter().map(|s| v.evaluate(s)).fold(0.0, f64::max).max(1.0);
    let dim = x0.dim();
    for j in 0..dim {
        for sign in [1.0, -1.0] {
            let ray = |t: f64| {
                let mut c = vec![0.0; dim];
                c[j] = sign * t;
                c
            };
            let mut t = 1.0;
            let mut guard = 0;
            while v.evaluate(&ray(t)) < 10.0 * vmax && guard < 200 {
                t *= 1.5;
                guard += 1;
            }
            for frac in [0.25, 0.5, 1.0] {
                probes.push(StateVector::new(ray(frac * t))?);
            }
        }
    }
    Ok(probes)
}
