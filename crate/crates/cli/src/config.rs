//! Flat `key = value` configuration files.
//!
//! Grammar, one item per line:
//!
//! ```text
//! # comment                 whole-line comment
//! [section]                 prefixes later keys with "section."
//! key.sub = value           dotted key; value runs to end of line or a '#'
//! list = 1, 2.5, 3          comma-separated lists
//! ```
//!
//! The reserved top-level keys are `kind`, `seed` and `out`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Probit,
    LogisticMinibatch,
    GpBounded,
    Pcn,
    OracleAudit,
    BoundsCalculator,
}

impl Kind {
    pub const ALL: [Kind; 6] =
        [Kind::Probit, Kind::LogisticMinibatch, Kind::GpBounded, Kind::Pcn, Kind::OracleAudit, Kind::BoundsCalculator];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Probit => "probit",
            Kind::LogisticMinibatch => "logistic-minibatch",
            Kind::GpBounded => "gp-bounded",
            Kind::Pcn => "pcn",
            Kind::OracleAudit => "oracle-audit",
            Kind::BoundsCalculator => "bounds-calculator",
        }
    }

    fn schema(self) -> &'static [(&'static str, Ty)] {
        use Ty::*;
        match self {
            Kind::Probit => &[
                ("data.path", Text),
                ("data.n", Int),
                ("data.p", Int),
                ("data.m_max", Int),
                ("mcmc.steps", Int),
                ("mcmc.burn_in", Int),
                ("mcmc.threshold", Int),
                ("drift.probes", Int),
                ("drift.reps", Int),
                ("drift.sigmas", Float),
            ],
            Kind::LogisticMinibatch => &[
                ("data.path", Text),
                ("data.n", Int),
                ("data.p", Int),
                ("prior.var", Float),
                ("minibatch.eps", Float),
                ("minibatch.n0", IntList),
                ("minibatch.fractions", FloatList),
                ("mcmc.steps", Int),
                ("mcmc.adapt_steps", Int),
                ("loess.span", Float),
                ("loess.grid_points", Int),
            ],
            Kind::GpBounded => &[
                ("data.path", Text),
                ("data.n", Int),
                ("data.dim", Int),
                ("data.spread", Float),
                ("data.x_true", Float),
                ("prior.a", Float),
                ("prior.b", Float),
                ("interval.lo", Float),
                ("interval.hi", Float),
                ("proposal.v", Float),
                ("grid.h", Float),
                ("metric.delta_scale", Float),
                ("mcmc.steps", Int),
                ("rank.eps", Float),
                ("rank.every", Int),
            ],
            Kind::Pcn => &[
                ("data.path", Text),
                ("data.n", Int),
                ("data.dim", Int),
                ("data.spread", Float),
                ("data.x_true", Float),
                ("pcn.theta", Float),
                ("approx.eps0", Float),
                ("approx.rank", Int),
                ("metric.beta", Float),
                ("table.u_max", Float),
                ("table.step", Float),
                ("drift.gamma", Float),
                ("grid.state_h", Float),
                ("check.probes", FloatList),
                ("check.reps", Int),
                ("mcmc.steps", Int),
            ],
            Kind::OracleAudit => &[
                ("audit.pairs", Int),
                ("audit.n_max", Int),
                ("audit.n_max_mse", Int),
                ("audit.eps_scale", Float),
            ],
            Kind::BoundsCalculator => &[
                ("bound.kind", Text),
                ("bound.eps", Float),
                ("bound.delta", Float),
                ("bound.alpha_bar", Float),
                ("bound.v_x", Float),
                ("bound.d_xy", Float),
                ("bound.mu_v", Float),
                ("bound.k", Float),
                ("bound.gamma", Float),
                ("bound.n", Int),
                ("bound.n_max", Int),
                ("bound.d0", Float),
                ("bound.alpha0_bar", Float),
                ("bound.zeta", Float),
                ("bound.alpha_half_bar", Float),
                ("bound.mu_sqrt_v", Float),
                ("bound.m_eps_x", Float),
                ("bound.c_lip", Float),
                ("bound.delta_scale", Float),
                ("bound.gamma_ball", Float),
                ("bound.alpha_gamma", Float),
                ("bound.alpha_small", Float),
                ("bound.r", Float),
                ("bound.gamma_bar", Float),
                ("bound.c", Float),
            ],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind '{s}'"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ty {
    Int,
    Float,
    Text,
    IntList,
    FloatList,
}

impl Ty {
    fn describe(self) -> &'static str {
        match self {
            Ty::Int => "a nonnegative integer",
            Ty::Float => "a number",
            Ty::Text => "text",
            Ty::IntList => "a comma-separated list of nonnegative integers",
            Ty::FloatList => "a comma-separated list of numbers",
        }
    }

    fn check(self, v: &str) -> bool {
        match self {
            Ty::Int => v.parse::<u64>().is_ok(),
            Ty::Float => v.parse::<f64>().is_ok_and(f64::is_finite),
            Ty::Text => !v.is_empty(),
            Ty::IntList => split_list(v).all(|x| x.parse::<u64>().is_ok()),
            Ty::FloatList => split_list(v).all(|x| x.parse::<f64>().is_ok_and(f64::is_finite)),
        }
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{}:{l}:{c}: {}", self.source, self.message),
            (Some(l), None) => write!(f, "{}:{l}: {}", self.source, self.message),
            _ => write!(f, "{}: {}", self.source, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    value: String,
    line: usize,
    column: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub out: Option<PathBuf>,
    source: String,
    entries: BTreeMap<String, Entry>,
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        source: name.clone(),
        line: None,
        column: None,
        message: format!("cannot read config: {e}"),
    })?;
    parse_config_str(&text, &name, None, None)
}

/// Parses config text. `kind` and `seed` supply or override the file's values.
pub fn parse_config_str(
    text: &str,
    source: &str,
    kind: Option<Kind>,
    seed: Option<u64>,
) -> Result<ExperimentConfig, ConfigError> {
    let err = |line: usize, column: usize, message: String| ConfigError {
        source: source.to_string(),
        line: Some(line),
        column: Some(column),
        message,
    };
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        let lead = body.len() - body.trim_start().len();
        let t = body.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line, lead + 1, "section header needs a closing ']'".into()))?
                .trim();
            if !valid_key(name) {
                return Err(err(line, lead + 2, format!("invalid section name '{name}'")));
            }
            section = format!("{name}.");
            continue;
        }
        let eq = body.find('=').ok_or_else(|| err(line, lead + 1, format!("expected 'key = value', found '{t}'")))?;
        let key = body[..eq].trim();
        if !valid_key(key) {
            return Err(err(line, lead + 1, format!("invalid key '{key}'")));
        }
        let after = &body[eq + 1..];
        let value = after.trim();
        let vcol = eq + 2 + (after.len() - after.trim_start().len());
        if value.is_empty() {
            return Err(err(line, vcol, format!("missing value for '{key}'")));
        }
        let full = if matches!(key, "kind" | "seed" | "out") && section.is_empty() {
            key.to_string()
        } else {
            format!("{section}{key}")
        };
        if let Some(prev) = entries.get(&full) {
            return Err(err(line, lead + 1, format!("duplicate key '{full}' (first set on line {})", prev.line)));
        }
        entries.insert(full, Entry { value: value.to_string(), line, column: vcol });
    }

    let kind = match (entries.remove("kind"), kind) {
        (Some(e), Some(k)) => {
            let named: Kind = e.value.parse().map_err(|m| err(e.line, e.column, m))?;
            if named != k {
                return Err(err(e.line, e.column, format!("config is for '{named}' but the '{k}' command was run")));
            }
            k
        }
        (Some(e), None) => e.value.parse().map_err(|m| err(e.line, e.column, m))?,
        (None, Some(k)) => k,
        (None, None) => {
            return Err(ConfigError {
                source: source.to_string(),
                line: None,
                column: None,
                message: "missing 'kind'".into(),
            })
        }
    };
    let file_seed = match entries.remove("seed") {
        Some(e) => Some(
            e.value
                .parse::<u64>()
                .map_err(|_| err(e.line, e.column, format!("seed must be a nonnegative integer, found '{}'", e.value)))?,
        ),
        None => None,
    };
    let seed = seed.or(file_seed).ok_or_else(|| ConfigError {
        source: source.to_string(),
        line: None,
        column: None,
        message: "seed required for reproducibility".into(),
    })?;
    let out = entries.remove("out").map(|e| PathBuf::from(e.value));

    let schema = kind.schema();
    for (k, e) in &entries {
        let ty = schema
            .iter()
            .find(|(n, _)| n == k)
            .map(|(_, t)| *t)
            .ok_or_else(|| ConfigError {
                source: source.to_string(),
                line: Some(e.line),
                column: Some(1 + text.lines().nth(e.line - 1).map_or(0, |l| l.len() - l.trim_start().len())),
                message: format!("unknown key '{k}' for {kind}"),
            })?;
        if !ty.check(&e.value) {
            return Err(err(e.line, e.column, format!("'{k}' must be {}, found '{}'", ty.describe(), e.value)));
        }
    }
    Ok(ExperimentConfig { kind, seed, out, source: source.to_string(), entries })
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k.split('.')
            .all(|s| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'))
}

impl ExperimentConfig {
    /// Defaults only: for runs without a config file.
    pub fn defaults(kind: Kind, seed: u64) -> Self {
        Self { kind, seed, out: None, source: "<defaults>".into(), entries: BTreeMap::new() }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Every key set in the file, with its raw value, in sorted order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, e)| (k.as_str(), e.value.as_str()))
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn usize_or(&self, key: &str, default: usize) -> usize {
        self.text(key).map_or(default, |v| v.parse().expect("validated integer"))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> f64 {
        self.text(key).map_or(default, |v| v.parse().expect("validated number"))
    }

    pub fn f64_opt(&self, key: &str) -> Option<f64> {
        self.text(key).map(|v| v.parse().expect("validated number"))
    }

    pub fn usize_list(&self, key: &str) -> Option<Vec<usize>> {
        self.text(key).map(|v| split_list(v).map(|x| x.parse().expect("validated integer")).collect())
    }

    pub fn f64_list(&self, key: &str) -> Option<Vec<f64>> {
        self.text(key).map(|v| split_list(v).map(|x| x.parse().expect("validated number")).collect())
    }

    /// A required key, reported against the config source when absent.
    pub fn require_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.f64_opt(key).ok_or_else(|| self.missing(key))
    }

    pub fn require_usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.text(key).map(|v| v.parse().expect("validated integer")).ok_or_else(|| self.missing(key))
    }

    fn missing(&self, key: &str) -> ConfigError {
        ConfigError { source: self.source.clone(), line: None, column: None, message: format!("missing required key '{key}'") }
    }

    /// An error located at `key`'s value.
    pub fn error_at(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let e = self.entries.get(key);
        ConfigError {
            source: self.source.clone(),
            line: e.map(|e| e.line),
            column: e.map(|e| e.column),
            message: message.into(),
        }
    }
}
