use std::fmt::{self, Write as _};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use perturb_core::bounds::{
    adaptive_tv_budget, finite_time_curve, harris_eps_constants, invariant_gap, invariant_gap_lyapunov, mse_bound,
    perturb_one_step, semimetric_beta, uniform_w1_alpha, w1_time_avg_bound, weak_harris_beta, weak_triangle_bounds,
    BoundReport,
};
use perturb_core::gp::{run_bounded, run_bounded_on, run_pcn, run_pcn_on, BoundedConfig, PcnConfig};
use perturb_core::logistic::{figure1_experiment, figure1_on, Figure1Config};
use perturb_core::lyapunov::{confidence_for_sigmas, verify_drift, DriftAudit};
use perturb_core::oracle::{bound_audit_many, AuditConfig};
use perturb_core::probit::{
    adaptive_gibbs_step, approx_gibbs_step, drift_probe_states, exact_gibbs_step, pinsker_tv_bound,
    probit_drift_constants_with, synthetic_probit, GibbsMode, ProbitData, ProbitKernel, ProbitState,
};
use perturb_core::{RandomSource, StateVector};

use crate::config::{ConfigError, ExperimentConfig, Kind};
use crate::ingest::{gp_from_table, logistic_from_table, probit_from_table, read_table, IngestError, Schema};
use crate::svg::{Plot, PALETTE};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Ingest(IngestError),
    Runtime(String),
}

impl RunError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Ingest(_) => 1,
            RunError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Ingest(e) => write!(f, "data error: {e}"),
            RunError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<IngestError> for RunError {
    fn from(e: IngestError) -> Self {
        RunError::Ingest(e)
    }
}

type Result<T> = std::result::Result<T, RunError>;

fn ctx<T>(what: &str, r: perturb_core::Result<T>) -> Result<T> {
    r.map_err(|e| RunError::Runtime(format!("{what}: {e}")))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Full-size minibatch experiment (N = 100,000).
    pub offline_scale: bool,
}

/// Files produced by a run, held in memory until written together.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Vec<String>,
    pub audit_failures: usize,
}

impl Artifacts {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| RunError::Runtime(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner().map_err(|e| RunError::Runtime(format!("csv: {e}")))
}

fn header(cfg: &ExperimentConfig, opts: &RunOptions) -> String {
    let mut s = format!("kind = {}\nseed = {}\nconfig = {}\n", cfg.kind, cfg.seed, cfg.source());
    if opts.offline_scale {
        s.push_str("offline_scale = true\n");
    }
    for (k, v) in cfg.entries() {
        let _ = writeln!(s, "{k} = {v}");
    }
    s.push('\n');
    s
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Artifacts> {
    let mut a = match cfg.kind {
        Kind::Probit => run_probit(cfg)?,
        Kind::LogisticMinibatch => run_logistic(cfg, opts)?,
        Kind::GpBounded => run_gp_bounded(cfg)?,
        Kind::Pcn => run_pcn_experiment(cfg)?,
        Kind::OracleAudit => run_oracle_audit(cfg)?,
        Kind::BoundsCalculator => run_bounds(cfg)?,
    };
    let mut report = header(cfg, opts);
    if let Some(pos) = a.files.iter().position(|(n, _)| n == "report.txt") {
        report.push_str(&String::from_utf8_lossy(&a.files[pos].1));
        a.files[pos].1 = report.into_bytes();
    }
    Ok(a)
}

fn probit_probes(data: &ProbitData, chain: &[DVector<f64>], count: usize) -> Vec<DVector<f64>> {
    let rays = drift_probe_states(data);
    let from_rays = count / 2;
    let stride = (rays.len() / from_rays.max(1)).max(1);
    let mut probes: Vec<DVector<f64>> = rays.iter().step_by(stride).take(from_rays).cloned().collect();
    let rest = count - probes.len();
    if rest > 0 && !chain.is_empty() {
        let step = (chain.len() / rest).max(1);
        probes.extend(chain.iter().step_by(step).take(rest).cloned());
    }
    probes
}

fn run_probit(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let data = match cfg.text("data.path") {
        Some(p) => probit_from_table(&read_table(Path::new(p), Schema::Probit)?, p)?,
        None => {
            let (n, p, m) = (cfg.usize_or("data.n", 50), cfg.usize_or("data.p", 3), cfg.usize_or("data.m_max", 30));
            ctx("synthetic probit data", synthetic_probit(n, p, m as u32, cfg.seed))?.0
        }
    };
    let steps = cfg.usize_or("mcmc.steps", 2000);
    let burn = cfg.usize_or("mcmc.burn_in", 200);
    if burn >= steps {
        return Err(cfg.error_at("mcmc.burn_in", "burn-in must be shorter than the run").into());
    }
    let threshold = cfg.usize_or("mcmc.threshold", 5) as u32;
    let n_probes = cfg.usize_or("drift.probes", 200);
    let reps = cfg.usize_or("drift.reps", 500);
    let sigmas = cfg.f64_or("drift.sigmas", 3.0);
    let p = data.dim();

    let labels = ["exact".to_string(), "approximate".to_string(), format!("adaptive-{threshold}")];
    let mut chains: Vec<Vec<DVector<f64>>> = Vec::new();
    let mut pinsker = Vec::new();
    for (k, label) in labels.iter().enumerate() {
        let mut rng = RandomSource::new(cfg.seed, 1 + k as u64);
        let mut s = ProbitState::zeros(p);
        let mut path = Vec::with_capacity(steps);
        for t in 0..steps {
            s = ctx(
                &format!("{label} gibbs step"),
                match k {
                    0 => exact_gibbs_step(&data, &s, &mut rng),
                    1 => approx_gibbs_step(&data, &s, &mut rng),
                    _ => adaptive_gibbs_step(&data, &s, threshold, &mut rng),
                },
            )?;
            if k == 1 {
                pinsker.push((t, ctx("pinsker bound", pinsker_tv_bound(&data, &s))?));
            }
            path.push(s.x.clone());
        }
        chains.push(path);
    }

    let probes = probit_probes(&data, &chains[0][burn..], n_probes);
    let cert = ctx("drift certificate", probit_drift_constants_with(&data, &probes))?;
    let states: Vec<StateVector> = probes
        .iter()
        .map(|x| ctx("probe state", StateVector::new(x.as_slice().to_vec())))
        .collect::<Result<_>>()?;
    let shared = Arc::new(data.clone());
    let mut rng = RandomSource::new(cfg.seed, 10);
    let mut audits: Vec<(&str, DriftAudit)> = Vec::new();
    for (label, mode) in [("exact", GibbsMode::Exact), ("approximate", GibbsMode::Approximate)] {
        let kernel = ProbitKernel::new(shared.clone(), mode);
        let audit = ctx("drift verification", verify_drift(&cert, &kernel, &states, reps, confidence_for_sigmas(sigmas), &mut rng))?;
        audits.push((label, audit));
    }

    let mut a = Artifacts::default();
    let mut coord_names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    coord_names.insert(0, "iter".into());
    coord_names.insert(0, "kernel".into());
    let hdr: Vec<&str> = coord_names.iter().map(String::as_str).collect();
    let rows = labels.iter().zip(&chains).flat_map(|(l, c)| {
        c.iter().enumerate().map(move |(t, x)| {
            let mut r = vec![l.clone(), t.to_string()];
            r.extend(x.iter().map(|v| v.to_string()));
            r
        })
    });
    a.add("chain.csv", csv_bytes(&hdr, rows)?);
    let drift_rows = audits.iter().flat_map(|(l, au)| {
        au.checks.iter().enumerate().map(move |(i, c)| {
            vec![l.to_string(), i.to_string(), c.v.to_string(), c.mean.to_string(), c.se.to_string(), c.rhs.to_string(), c.pass.to_string()]
        })
    });
    a.add("drift.csv", csv_bytes(&["kernel", "probe", "v", "mean", "se", "rhs", "pass"], drift_rows)?);
    a.add(
        "pinsker.csv",
        csv_bytes(&["iter", "tv_bound"], pinsker.iter().map(|(t, b)| vec![t.to_string(), b.to_string()]))?,
    );

    let mut r = String::new();
    let _ = writeln!(r, "observations = {}\ncoefficients = {p}\nmax_trials = {}", data.n_obs(), data.max_trials());
    let _ = writeln!(r, "interior_counts = {}", data.hypothesis_holds());
    let _ = writeln!(r, "\n[drift]\n{}", cert.to_kv().trim_end());
    let _ = writeln!(r, "probes = {}\nreps = {reps}\nsigmas = {sigmas}", states.len());
    for (l, au) in &audits {
        a.audit_failures += au.violations();
        let _ = writeln!(r, "{l}_violations = {}", au.violations());
    }
    let _ = writeln!(r, "\n[posterior_mean]");
    for (l, c) in labels.iter().zip(&chains) {
        let tail = &c[burn..];
        let mean: Vec<String> =
            (0..p).map(|j| format!("{:.6}", tail.iter().map(|x| x[j]).sum::<f64>() / tail.len() as f64)).collect();
        let _ = writeln!(r, "{l} = {}", mean.join(", "));
    }
    let tail: Vec<f64> = pinsker[burn..].iter().map(|x| x.1).collect();
    let _ = writeln!(
        r,
        "\n[pinsker]\nmean = {:.6}\nmax = {:.6}",
        tail.iter().sum::<f64>() / tail.len() as f64,
        tail.iter().copied().fold(0.0, f64::max)
    );
    a.add("report.txt", r.into_bytes());
    let mut plot = Plot::new("Probit Gibbs traces", "iteration", "x1");
    for (k, (l, c)) in labels.iter().zip(&chains).enumerate().take(2) {
        plot = plot.line(c.iter().enumerate().map(|(t, x)| (t as f64, x[0])).collect(), PALETTE[k], Some(l));
    }
    a.add("trace.svg", plot.render().into_bytes());
    a.summary.push(format!(
        "probit: gamma {:.5}, K {:.4}, drift violations {}",
        cert.gamma, cert.k, a.audit_failures
    ));
    Ok(a)
}

fn run_logistic(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Artifacts> {
    let prior_var = cfg.f64_or("prior.var", 100.0);
    let data = match cfg.text("data.path") {
        Some(p) => Some(logistic_from_table(&read_table(Path::new(p), Schema::Logistic)?, p, prior_var)?),
        None => None,
    };
    let (n, p) = match &data {
        Some(d) => (d.n_obs(), d.dim()),
        None => {
            let n = if cfg.has("data.n") { cfg.usize_or("data.n", 10_000) } else if opts.offline_scale { 100_000 } else { 10_000 };
            (n, cfg.usize_or("data.p", 2))
        }
    };
    let n0_grid = match cfg.usize_list("minibatch.n0") {
        Some(g) => g,
        None => cfg
            .f64_list("minibatch.fractions")
            .unwrap_or_else(|| vec![0.1, 0.3, 0.5, 0.7, 0.9])
            .iter()
            .map(|f| ((f * n as f64).round() as usize).max(1))
            .collect(),
    };
    let f1 = Figure1Config {
        n,
        p,
        n0_grid,
        eps: cfg.f64_or("minibatch.eps", 0.1),
        steps: cfg.usize_or("mcmc.steps", 10_000),
        adapt_steps: cfg.usize_or("mcmc.adapt_steps", 5000),
        seed: cfg.seed,
        span: cfg.f64_or("loess.span", 0.3),
        grid_points: cfg.usize_or("loess.grid_points", 40),
        prior_var,
        truth: None,
    };
    let res = match &data {
        Some(d) => ctx("minibatch experiment", figure1_on(d, &f1))?,
        None => ctx("minibatch experiment", figure1_experiment(&f1))?,
    };

    let mut a = Artifacts::default();
    let rows = res.rows.iter().map(|r| {
        vec![
            r.n0.to_string(),
            r.d_mahalanobis.to_string(),
            r.abs_delta.to_string(),
            u8::from(r.accepted_exact).to_string(),
            u8::from(r.accepted_minibatch).to_string(),
        ]
    });
    a.add("delta.csv", csv_bytes(&["n0", "d_mahalanobis", "abs_delta", "accepted_exact", "accepted_minibatch"], rows)?);
    let curve_rows = res.curves.iter().map(|c| vec![c.n0.to_string(), c.d_grid.to_string(), c.p_hat.to_string()]);
    a.add("curves.csv", csv_bytes(&["n0", "d_grid", "p_hat"], curve_rows)?);

    let mut r = String::new();
    let _ = writeln!(r, "observations = {n}\ncoefficients = {p}");
    let xh: Vec<String> = res.x_hat.iter().map(|v| format!("{v:.6}")).collect();
    let _ = writeln!(r, "x_hat = {}", xh.join(", "));
    let sh: Vec<String> = res.sigma_hat.iter().map(|v| format!("{v:.6e}")).collect();
    let _ = writeln!(r, "sigma_hat (column-major) = {}", sh.join(", "));
    let _ = writeln!(r, "pilot_acceptance = {:.4}\nexact_acceptance = {:.4}", res.pilot_acceptance, res.exact_acceptance);
    let _ = writeln!(r, "\n[per_n0]");
    let dmed = {
        let mut d: Vec<f64> = res.rows.iter().filter(|x| x.n0 == f1.n0_grid[0]).map(|x| x.d_mahalanobis).collect();
        d.sort_by(f64::total_cmp);
        d.get(d.len() / 10).copied().unwrap_or(0.0)
    };
    for &k in &f1.n0_grid {
        let rows: Vec<_> = res.rows.iter().filter(|x| x.n0 == k).collect();
        let agree = rows.iter().filter(|x| x.accepted_exact == x.accepted_minibatch).count() as f64 / rows.len() as f64;
        let small = rows.iter().filter(|x| x.abs_delta < f1.eps).count() as f64 / rows.len() as f64;
        let centre = res.center_probability(k, dmed).unwrap_or(f64::NAN);
        let _ = writeln!(
            r,
            "n0 = {k}: P(|delta| < eps) = {small:.4}, near-centre = {centre:.4}, decisions agree = {agree:.4}, minibatch acceptance = {:.4}",
            rows.iter().filter(|x| x.accepted_minibatch).count() as f64 / rows.len() as f64
        );
    }
    a.add("report.txt", r.into_bytes());

    let mut curves = Plot::new(&format!("P(|delta| < {}) against Mahalanobis distance", f1.eps), "D", "probability");
    let mut scatter = Plot::new("|delta| against Mahalanobis distance", "D", "|delta|");
    for (k, &n0) in f1.n0_grid.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let label = format!("N0 = {n0}");
        curves = curves.line(res.curve(n0).iter().map(|c| (c.d_grid, c.p_hat)).collect(), color, Some(&label));
        let pts: Vec<(f64, f64)> =
            res.rows.iter().filter(|x| x.n0 == n0).take(2000).map(|x| (x.d_mahalanobis, x.abs_delta)).collect();
        scatter = scatter.scatter(pts, color, Some(&label));
    }
    a.add("curves.svg", curves.render().into_bytes());
    a.add("delta.svg", scatter.render().into_bytes());
    a.summary.push(format!("logistic-minibatch: N = {n}, {} subset sizes, {} recorded steps each", f1.n0_grid.len(), f1.steps));
    Ok(a)
}

fn run_gp_bounded(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let d = BoundedConfig::default();
    let bc = BoundedConfig {
        n: cfg.usize_or("data.n", d.n),
        dim: cfg.usize_or("data.dim", d.dim),
        spread: cfg.f64_or("data.spread", d.spread),
        x_true: cfg.f64_or("data.x_true", d.x_true),
        a: cfg.f64_or("prior.a", d.a),
        b: cfg.f64_or("prior.b", d.b),
        lo: cfg.f64_or("interval.lo", d.lo),
        hi: cfg.f64_or("interval.hi", d.hi),
        v: cfg.f64_or("proposal.v", d.v),
        h: cfg.f64_or("grid.h", d.h),
        delta_scale: cfg.f64_or("metric.delta_scale", d.delta_scale),
        steps: cfg.usize_or("mcmc.steps", d.steps),
        rank_eps: cfg.f64_or("rank.eps", d.rank_eps),
        rank_every: cfg.usize_or("rank.every", d.rank_every),
        seed: cfg.seed,
    };
    let rep = match cfg.text("data.path") {
        Some(p) => ctx("bounded gp run", run_bounded_on(gp_from_table(&read_table(Path::new(p), Schema::Gp)?, p)?, &bc))?,
        None => ctx("bounded gp run", run_bounded(&bc))?,
    };
    let mut a = Artifacts::default();
    a.add("chain.csv", csv_bytes(&["iter", "x"], rep.path.iter().enumerate().map(|(t, x)| vec![t.to_string(), x.to_string()]))?);
    a.add(
        "ranks.csv",
        csv_bytes(
            &["step", "rank"],
            rep.ranks.iter().enumerate().map(|(i, r)| vec![(i * bc.rank_every).to_string(), r.to_string()]),
        )?,
    );
    let c = &rep.constants;
    let mut r = String::new();
    let _ = writeln!(r, "acceptance_rate = {:.4}\ngrid_spacing = {}\nmax_snap_error = {}", rep.acceptance_rate, rep.grid_spacing, rep.max_snap_error);
    let _ = writeln!(r, "max_w1 = {}\nw1_limit = {}", rep.max_w1, rep.w1_limit);
    let _ = writeln!(r, "cache_entries = {}\ncache_hit_rate = {:.4}", rep.cache_entries, rep.cache_hit_rate);
    let max_rank = rep.ranks.iter().copied().max().unwrap_or(0);
    let _ = writeln!(r, "max_rank = {max_rank}");
    let _ = writeln!(r, "\n[theory_constants]");
    for (k, v) in [
        ("log_target_lower", c.log_target_lower),
        ("log_target_upper", c.log_target_upper),
        ("log_q_lower", c.log_q_lower),
        ("log_q_upper", c.log_q_upper),
        ("d_bar", c.d_bar),
        ("d_bar_frobenius", c.d_bar_frobenius),
        ("log_kappa_derivative", c.log_kappa_derivative),
    ] {
        let _ = writeln!(r, "{k} = {v}");
    }
    if rep.max_w1 > rep.w1_limit || rep.max_snap_error > 0.5 * rep.grid_spacing + 1e-12 {
        a.audit_failures += 1;
    }
    a.add("report.txt", r.into_bytes());
    let plot = Plot::new("Discretized Metropolis trace", "iteration", "x")
        .line(rep.path.iter().enumerate().map(|(t, &x)| (t as f64, x)).collect(), PALETTE[0], None);
    a.add("trace.svg", plot.render().into_bytes());
    a.summary.push(format!(
        "gp-bounded: acceptance {:.3}, snap W1 {:.4} <= {:.4}, max rank {max_rank}",
        rep.acceptance_rate, rep.max_w1, rep.w1_limit
    ));
    Ok(a)
}

fn run_pcn_experiment(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let d = PcnConfig::default();
    let pc = PcnConfig {
        n: cfg.usize_or("data.n", d.n),
        dim: cfg.usize_or("data.dim", d.dim),
        spread: cfg.f64_or("data.spread", d.spread),
        x_true: cfg.f64_or("data.x_true", d.x_true),
        theta: cfg.f64_or("pcn.theta", d.theta),
        eps0: cfg.f64_or("approx.eps0", d.eps0),
        rank: cfg.usize_or("approx.rank", d.rank),
        beta: cfg.f64_or("metric.beta", d.beta),
        u_max: cfg.f64_or("table.u_max", d.u_max),
        table_step: cfg.f64_or("table.step", d.table_step),
        gamma: cfg.f64_or("drift.gamma", d.gamma),
        state_h: cfg.f64_or("grid.state_h", d.state_h),
        probes: cfg.f64_list("check.probes").unwrap_or(d.probes.clone()),
        reps: cfg.usize_or("check.reps", d.reps),
        chain_steps: cfg.usize_or("mcmc.steps", d.chain_steps),
        seed: cfg.seed,
    };
    let rep = match cfg.text("data.path") {
        Some(p) => ctx("pcn run", run_pcn_on(gp_from_table(&read_table(Path::new(p), Schema::Gp)?, p)?, &pc))?,
        None => ctx("pcn run", run_pcn(&pc))?,
    };
    let mut a = Artifacts::default();
    let rows = rep.coupling.iter().map(|c| vec![c.x.to_string(), c.mean.to_string(), c.se.to_string(), c.bound.to_string(), c.pass.to_string()]);
    a.add("coupling.csv", csv_bytes(&["x", "mean", "se", "bound", "pass"], rows)?);
    let rows = rep
        .lyapunov
        .probes
        .iter()
        .map(|c| vec![c.x.to_string(), c.v.to_string(), c.mean.to_string(), c.se.to_string(), c.bound.to_string(), c.pass.to_string()]);
    a.add("lyapunov.csv", csv_bytes(&["x", "v", "mean", "se", "bound", "pass"], rows)?);
    a.add("chain.csv", csv_bytes(&["iter", "x"], rep.path.iter().enumerate().map(|(t, x)| vec![t.to_string(), x.to_string()]))?);

    let b = &rep.budget;
    let l = &rep.lyapunov;
    let mut r = String::new();
    let _ = writeln!(r, "acceptance_rate = {:.4}", rep.acceptance_rate);
    let _ = writeln!(
        r,
        "\n[error_budget]\neps0 = {}\nrank = {}\nlipschitz = {}\nrank_error = {}\nmoment = {}\neps = {}",
        b.eps0, b.r, b.lipschitz, b.rank_error, b.moment, b.eps
    );
    let _ = writeln!(r, "coupling_passed = {}", rep.coupling_passed());
    let _ = writeln!(r, "\n[drift]\n{}\nradius = {}", rep.drift.to_kv().trim_end(), rep.drift_radius);
    let _ = writeln!(
        r,
        "\n[discretized_lyapunov]\nfactor = {}\ncontracting = {}\nmax_log_ratio = {}\neps = {}\npassed = {}",
        l.factor,
        l.contracting,
        l.max_log_ratio,
        l.eps,
        l.passed()
    );
    a.audit_failures += rep.coupling.iter().filter(|c| !c.pass).count() + usize::from(!l.passed());
    a.add("report.txt", r.into_bytes());
    let plot = Plot::new("Coupled semimetric distance", "x", "E d")
        .scatter(rep.coupling.iter().map(|c| (c.x, c.mean)).collect(), PALETTE[0], Some("estimate"))
        .line(rep.coupling.iter().map(|c| (c.x, c.bound)).collect(), PALETTE[1], Some("bound"));
    a.add("coupling.svg", plot.render().into_bytes());
    a.summary.push(format!(
        "pcn: eps {:.4}, coupling passed {}, lyapunov factor {:.4} passed {}",
        b.eps,
        rep.coupling_passed(),
        l.factor,
        l.passed()
    ));
    Ok(a)
}

fn run_oracle_audit(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let d = AuditConfig::default();
    let ac = AuditConfig {
        n_max: cfg.usize_or("audit.n_max", d.n_max),
        n_max_mse: cfg.usize_or("audit.n_max_mse", d.n_max_mse),
        eps_scale: cfg.f64_or("audit.eps_scale", d.eps_scale),
    };
    let pairs = cfg.usize_or("audit.pairs", 100) as u64;
    let seeds: Vec<u64> = (cfg.seed..cfg.seed + pairs).collect();
    let reports = ctx("oracle audit", bound_audit_many(&seeds, &ac))?;
    let mut a = Artifacts::default();
    let ledger = reports.iter().flat_map(|rep| {
        rep.rows.iter().map(move |r| {
            vec![
                rep.seed.to_string(),
                r.bound_id.clone(),
                r.n.to_string(),
                r.lhs.to_string(),
                r.rhs.to_string(),
                r.margin.to_string(),
                r.pass.to_string(),
            ]
        })
    });
    a.add("ledger.csv", csv_bytes(&["seed", "bound_id", "n", "lhs", "rhs", "margin", "pass"], ledger)?);
    let consts = reports
        .iter()
        .flat_map(|rep| rep.constants.iter().map(move |(k, v)| vec![rep.seed.to_string(), k.clone(), v.to_string()]));
    a.add("constants.csv", csv_bytes(&["seed", "name", "value"], consts)?);
    let skipped = reports
        .iter()
        .flat_map(|rep| rep.skipped.iter().map(move |(k, why)| vec![rep.seed.to_string(), k.clone(), why.clone()]));
    a.add("skipped.csv", csv_bytes(&["seed", "bound_id", "reason"], skipped)?);

    let rows: usize = reports.iter().map(|r| r.rows.len()).sum();
    let violations: usize = reports.iter().map(|r| r.violations().len()).sum();
    let worst = reports.iter().flat_map(|r| &r.rows).map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let mut ids: Vec<&str> = reports.iter().flat_map(|r| r.rows.iter().map(|x| x.bound_id.as_str())).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut r = String::new();
    let _ = writeln!(r, "pairs = {}\nrows = {rows}\nviolations = {violations}\nworst_margin = {worst:e}", reports.len());
    let _ = writeln!(r, "\n[rows_per_bound]");
    for id in &ids {
        let c = reports.iter().flat_map(|r| &r.rows).filter(|x| x.bound_id == *id).count();
        let v = reports.iter().flat_map(|r| &r.rows).filter(|x| x.bound_id == *id && !x.pass).count();
        let _ = writeln!(r, "{id} = {c} rows, {v} violations");
    }
    a.add("report.txt", r.into_bytes());
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .flat_map(|r| &r.rows)
        .filter(|x| x.rhs.is_finite() && x.rhs > 0.0 && x.lhs > 0.0)
        .map(|x| (x.rhs.log10(), x.lhs.log10()))
        .collect();
    let lo = pts.iter().map(|p| p.0.min(p.1)).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0.max(p.1)).fold(f64::NEG_INFINITY, f64::max);
    let mut plot = Plot::new("Exact quantity against bound", "log10 bound", "log10 exact").scatter(pts, PALETTE[0], Some("rows"));
    if lo.is_finite() && hi.is_finite() {
        plot = plot.line(vec![(lo, lo), (hi, hi)], PALETTE[1], Some("equality"));
    }
    a.add("margins.svg", plot.render().into_bytes());
    a.audit_failures = violations;
    a.summary.push(format!("oracle-audit: {} pairs, {rows} rows, {violations} violations, worst margin {worst:.3e}", reports.len()));
    Ok(a)
}

fn run_bounds(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let kind = cfg.text("bound.kind").ok_or_else(|| RunError::Config(cfg.error_at("bound.kind", "missing required key 'bound.kind'")))?;
    let f = |k: &str| cfg.require_f64(&format!("bound.{k}"));
    let u = |k: &str| cfg.require_usize(&format!("bound.{k}"));
    let calc = |r: perturb_core::Result<f64>| ctx(kind, r);
    let echo = |mut rep: BoundReport, keys: &[&str]| -> Result<BoundReport> {
        for k in keys {
            let v = match *k {
                "n" | "n_max" => u(k)? as f64,
                _ => f(k)?,
            };
            rep.inputs.push((k.to_string(), v));
        }
        Ok(rep)
    };
    let mut curve2: Option<Vec<(usize, f64)>> = None;
    let rep = match kind {
        "one_step" => {
            let v = calc(perturb_one_step(f("eps")?, f("delta")?, f("v_x")?, f("alpha_bar")?, f("d_xy")?))?;
            echo(BoundReport::new(kind), &["eps", "delta", "v_x", "alpha_bar", "d_xy"])?.value("bound", v)
        }
        "invariant_gap" => {
            let v = calc(invariant_gap(f("eps")?, f("alpha_bar")?, f("delta")?, f("mu_v")?))?;
            echo(BoundReport::new(kind), &["eps", "alpha_bar", "delta", "mu_v"])?.value("bound", v)
        }
        "invariant_gap_lyapunov" => {
            let v = calc(invariant_gap_lyapunov(f("eps")?, f("alpha_bar")?, f("delta")?, f("k")?, f("gamma")?))?;
            echo(BoundReport::new(kind), &["eps", "alpha_bar", "delta", "k", "gamma"])?.value("bound", v)
        }
        "finite_time" => {
            let c = ctx(kind, finite_time_curve(u("n_max")?, f("eps")?, f("delta")?, f("alpha_bar")?, f("gamma")?, f("k")?, f("mu_v")?, f("d0")?))?;
            let mut rep = echo(BoundReport::new(kind), &["n_max", "eps", "delta", "alpha_bar", "gamma", "k", "mu_v", "d0"])?
                .value("sum_form_last", *c.sum_form.last().unwrap_or(&f64::NAN))
                .value("closed_form_last", *c.closed_form.last().unwrap_or(&f64::NAN));
            rep.curve = c.sum_form.iter().enumerate().map(|(i, v)| (i + 1, *v)).collect();
            curve2 = Some(c.closed_form.iter().enumerate().map(|(i, v)| (i + 1, *v)).collect());
            rep
        }
        "harris" => {
            let h = harris_eps_constants(f("gamma")?, f("k")?, f("eps")?, f("delta")?, f("alpha0_bar")?, f("zeta")?);
            let mut rep = h.report();
            rep.kind = kind.into();
            echo(rep, &["gamma", "k", "eps", "delta", "alpha0_bar", "zeta"])?
        }
        "mse" => {
            let m = ctx(
                kind,
                mse_bound(u("n")?, f("eps")?, f("delta")?, f("gamma")?, f("k")?, f("alpha_half_bar")?, f("mu_sqrt_v")?, f("v_x")?),
            )?;
            let mut rep = m.report();
            rep.kind = kind.into();
            echo(rep, &["n", "eps", "delta", "gamma", "k", "alpha_half_bar", "mu_sqrt_v", "v_x"])?
        }
        "tv_budget" => {
            let v = calc(adaptive_tv_budget(f("eps")?, f("gamma")?, f("v_x")?, f("m_eps_x")?))?;
            echo(BoundReport::new(kind), &["eps", "gamma", "v_x", "m_eps_x"])?.value("bound", v)
        }
        "w1_alpha" => {
            let v = calc(uniform_w1_alpha(f("c_lip")?, f("delta_scale")?, f("gamma_ball")?, f("alpha_gamma")?))?;
            echo(BoundReport::new(kind), &["c_lip", "delta_scale", "gamma_ball", "alpha_gamma"])?.value("alpha_bar", v)
        }
        "w1_time_avg" => {
            let v = calc(w1_time_avg_bound(u("n")?, f("eps")?, f("alpha_bar")?))?;
            echo(BoundReport::new(kind), &["n", "eps", "alpha_bar"])?.value("bound", v)
        }
        "semimetric_beta" => {
            let v = calc(semimetric_beta(f("alpha_small")?, f("k")?, f("gamma")?, f("r")?, f("alpha0_bar")?))?;
            echo(BoundReport::new(kind), &["alpha_small", "k", "gamma", "r", "alpha0_bar"])?.value("beta", v)
        }
        "weak_harris" => {
            let gb = cfg.f64_opt("bound.gamma_bar");
            let w = ctx(kind, weak_harris_beta(f("gamma")?, f("k")?, f("alpha0_bar")?, f("alpha_small")?, f("r")?, gb))?;
            let mut rep = echo(BoundReport::new(kind), &["gamma", "k", "alpha0_bar", "alpha_small", "r"])?;
            if let Some(g) = gb {
                rep.inputs.push(("gamma_bar".into(), g));
            }
            rep.value("beta", w.beta)
                .value("alpha_bar", w.alpha_bar)
                .value("branch_1", w.branches[0])
                .value("branch_2", w.branches[1])
                .value("branch_3", w.branches[2])
        }
        "weak_triangle" => {
            let w = ctx(
                kind,
                weak_triangle_bounds(
                    f("c")?,
                    f("alpha_bar")?,
                    f("eps")?,
                    f("delta")?,
                    u("n")?,
                    f("k")?,
                    f("gamma")?,
                    f("v_x")?,
                    f("mu_v")?,
                    f("d_xy")?,
                    u("n_max")?,
                ),
            )?;
            echo(BoundReport::new(kind), &["c", "alpha_bar", "eps", "delta", "n", "k", "gamma", "v_x", "mu_v", "d_xy", "n_max"])?
                .value("c_n", w.c_n)
                .value("v_tilde", w.v_tilde)
                .value("n_step", w.n_step)
                .value("n_min", w.n_min as f64)
                .value("n_used", w.n_used as f64)
                .value("invariant", w.invariant)
        }
        other => {
            return Err(cfg
                .error_at(
                    "bound.kind",
                    format!(
                        "unknown bound kind '{other}'; expected one of one_step, invariant_gap, invariant_gap_lyapunov, finite_time, harris, mse, tv_budget, w1_alpha, w1_time_avg, semimetric_beta, weak_harris, weak_triangle"
                    ),
                )
                .into())
        }
    };
    let mut a = Artifacts::default();
    let mut body = BoundReport::csv_header().to_string();
    body.push('\n');
    for line in rep.to_csv_rows() {
        body.push_str(&line);
        body.push('\n');
    }
    a.add("bounds.csv", body.into_bytes());
    a.add("report.txt", rep.to_text().into_bytes());
    if !rep.curve.is_empty() {
        let mut plot = Plot::new("Finite-time bound", "n", "bound")
            .line(rep.curve.iter().map(|(n, v)| (*n as f64, *v)).collect(), PALETTE[0], Some("sum form"));
        if let Some(c) = curve2 {
            plot = plot.line(c.iter().map(|(n, v)| (*n as f64, *v)).collect(), PALETTE[1], Some("closed form"));
        }
        a.add("curve.svg", plot.render().into_bytes());
    }
    let vals: Vec<String> = rep.values.iter().map(|(k, v)| format!("{k} = {v}")).collect();
    a.summary.push(format!("bounds-calculator {kind}: {}", vals.join(", ")));
    Ok(a)
}
