use rayon::prelude::*;

use super::pcn::{exp_lyapunov, LyapunovCheckConfig};
use super::{
    adaptive_rank, coupled_pcn_approx_step, decompose, discrete_lyapunov_check, discretized_mh_step, gp_theory_constants,
    pcn_drift_certificate, pcn_error_budget, pcn_step, snap_coupling_w1, synthetic_gp, Convention, GPData, GridSpec,
    LyapunovCheckReport, PcnErrorBudget, SpectralCache, TheoryConstants,
};
use crate::error::{param, Result};
use crate::kernels::theta::Interval;
use crate::lyapunov::DriftCertificate;
use crate::rng::RandomSource;
use crate::stats::Estimate;

#[derive(Clone, Debug, PartialEq)]
pub struct BoundedConfig {
    pub n: usize,
    pub dim: usize,
    pub spread: f64,
    pub x_true: f64,
    pub a: f64,
    pub b: f64,
    pub lo: f64,
    pub hi: f64,
    pub v: f64,
    pub h: f64,
    pub delta_scale: f64,
    pub steps: usize,
    pub rank_eps: f64,
    /// Every this many steps the adaptive rank of the proposed move is recorded.
    pub rank_every: usize,
    pub seed: u64,
}

impl Default for BoundedConfig {
    fn default() -> Self {
        Self {
            n: 50,
            dim: 2,
            spread: 1.0,
            x_true: 2.0,
            a: 2.0,
            b: 1.0,
            lo: 0.1,
            hi: 6.0,
            v: 0.5,
            h: 0.02,
            delta_scale: 0.5,
            steps: 2_000,
            rank_eps: 1e-3,
            rank_every: 20,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundedReport {
    pub path: Vec<f64>,
    pub acceptance_rate: f64,
    pub max_snap_error: f64,
    pub grid_spacing: f64,
    /// Largest snap-coupling cost over visited states; at most h/(2δ).
    pub max_w1: f64,
    pub w1_limit: f64,
    pub cache_hit_rate: f64,
    pub cache_entries: usize,
    pub ranks: Vec<usize>,
    pub constants: TheoryConstants,
}

pub fn run_bounded(config: &BoundedConfig) -> Result<BoundedReport> {
    if config.steps == 0 || config.rank_every == 0 {
        return Err(param("steps and rank_every must be positive"));
    }
    let data = synthetic_gp(config.n, config.dim, config.spread, config.x_true, Convention::Linear, config.seed)?;
    run_bounded_on(data, config)
}

/// Runs on supplied locations and responses. `n`, `dim` and `spread` are ignored; `x_true` is the starting state.
pub fn run_bounded_on(data: GPData, config: &BoundedConfig) -> Result<BoundedReport> {
    if config.steps == 0 || config.rank_every == 0 {
        return Err(param("steps and rank_every must be positive"));
    }
    let interval = Interval::new(config.lo, config.hi)?;
    let data = data
        .with_convention(Convention::Linear)
        .with_prior(config.a, config.b)?
        .with_interval(interval)
        .with_proposal_var(config.v)?;
    let grid = GridSpec::covering(&interval, config.h)?;
    let cache = SpectralCache::new();
    let mut rng = RandomSource::new(config.seed, 1);
    let mut x = grid.snap(config.x_true.clamp(config.lo, config.hi)).1;
    let mut path = Vec::with_capacity(config.steps);
    let (mut acc, mut max_snap) = (0usize, 0.0f64);
    let mut ranks = Vec::new();
    let mut visited = std::collections::BTreeSet::new();
    for t in 0..config.steps {
        let (nx, st) = discretized_mh_step(&data, &grid, &cache, x, &mut rng)?;
        max_snap = max_snap.max((st.y - st.y_star).abs());
        if t % config.rank_every == 0 {
            let kx = grid.index_of(x).expect("chain stays on the grid") as i64;
            let sx = cache.get_or_insert_with(kx, || decompose(&data.kernel_matrix(x)))?;
            let sy = cache.get_or_insert_with(st.index as i64, || decompose(&data.kernel_matrix(st.y)))?;
            ranks.push(adaptive_rank(&data, &sx, &sy, config.rank_eps)?);
        }
        acc += st.accepted as usize;
        x = nx;
        visited.insert(grid.index_of(x).expect("chain stays on the grid"));
        path.push(x);
    }
    let w1: Vec<f64> = visited
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&k| snap_coupling_w1(&data, &grid, grid.point(k), config.delta_scale))
        .collect::<Result<_>>()?;
    Ok(BoundedReport {
        path,
        acceptance_rate: acc as f64 / config.steps as f64,
        max_snap_error: max_snap,
        grid_spacing: grid.spacing(),
        max_w1: w1.into_iter().fold(0.0, f64::max),
        w1_limit: grid.spacing() / (2.0 * config.delta_scale),
        cache_hit_rate: cache.hit_rate(),
        cache_entries: cache.len(),
        ranks,
        constants: gp_theory_constants(&data)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcnConfig {
    pub n: usize,
    pub dim: usize,
    pub spread: f64,
    pub x_true: f64,
    pub theta: f64,
    /// Innovation grid spacing.
    pub eps0: f64,
    pub rank: usize,
    pub beta: f64,
    /// Window and step on which Φ, Φ′ and Φ − Φ_r are tabulated.
    pub u_max: f64,
    pub table_step: f64,
    pub gamma: f64,
    /// Spacing of the state grid used for the Lyapunov preservation check.
    pub state_h: f64,
    pub probes: Vec<f64>,
    pub reps: usize,
    pub chain_steps: usize,
    pub seed: u64,
}

impl Default for PcnConfig {
    fn default() -> Self {
        Self {
            n: 50,
            dim: 1,
            spread: 1.0,
            x_true: 1.0,
            theta: 0.5,
            eps0: 1e-3,
            rank: 30,
            beta: 1.0,
            u_max: 20.0,
            table_step: 0.02,
            gamma: 0.9,
            state_h: 0.02,
            probes: vec![0.0, 0.5, 1.0, 2.0],
            reps: 2_000,
            chain_steps: 2_000,
            seed: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcnProbe {
    pub x: f64,
    pub mean: f64,
    pub se: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct PcnReport {
    pub budget: PcnErrorBudget,
    pub coupling: Vec<PcnProbe>,
    pub drift: DriftCertificate,
    pub drift_radius: f64,
    pub lyapunov: LyapunovCheckReport,
    pub path: Vec<f64>,
    pub acceptance_rate: f64,
}

impl PcnReport {
    pub fn coupling_passed(&self) -> bool {
        self.coupling.iter().all(|p| p.pass)
    }
}

pub fn run_pcn(config: &PcnConfig) -> Result<PcnReport> {
    if config.reps < 2 {
        return Err(param("need at least two replicates"));
    }
    let data = synthetic_gp(config.n, config.dim, config.spread, config.x_true, Convention::Squared, config.seed)?;
    run_pcn_on(data, config)
}

/// Runs on supplied locations and responses. `n`, `dim` and `spread` are ignored; `x_true` is the starting state.
pub fn run_pcn_on(data: GPData, config: &PcnConfig) -> Result<PcnReport> {
    if config.reps < 2 {
        return Err(param("need at least two replicates"));
    }
    let data = data.with_convention(Convention::Squared).with_theta(config.theta)?;
    let budget = pcn_error_budget(&data, config.eps0, config.rank, config.u_max, config.table_step)?;
    let sd = (1.0 - config.theta * config.theta).sqrt();
    let noise_grid = GridSpec::window(0.0, 8.0 * sd, config.eps0.max(f64::MIN_POSITIVE))?;
    let root = RandomSource::new(config.seed, 2);
    let coupling = config
        .probes
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut rng = root.substream(10 + i as u64);
            let ds = (0..config.reps)
                .map(|_| Ok(coupled_pcn_approx_step((x, x), &data, &noise_grid, config.rank, config.beta, &mut rng)?.1.d_tilde))
                .collect::<Result<Vec<f64>>>()?;
            let e = Estimate::from_samples(&ds);
            let bound = budget.bound(config.beta, x);
            Ok(PcnProbe { x, mean: e.mean, se: e.se, bound, pass: e.mean <= bound + 3.0 * e.se })
        })
        .collect::<Result<Vec<_>>>()?;
    let (drift, drift_radius) = pcn_drift_certificate(&data, config.gamma, config.u_max.min(15.0), config.table_step)?;
    let state_grid = GridSpec::window(0.0, config.u_max, config.state_h)?;
    let mut rng = root.substream(1);
    let step = |x: f64, r: &mut RandomSource| Ok(pcn_step(x, &data, r)?.0);
    let lyapunov = discrete_lyapunov_check(
        step,
        Some(&state_grid),
        exp_lyapunov,
        LyapunovCheckConfig { gamma: drift.gamma, k: drift.k, eps: 0.5 * state_grid.spacing(), reps: config.reps, z: 3.0 },
        &config.probes,
        &mut rng,
    )?;
    let mut x = config.x_true;
    let mut path = Vec::with_capacity(config.chain_steps);
    let mut acc = 0usize;
    for _ in 0..config.chain_steps {
        let (nx, st) = pcn_step(x, &data, &mut rng)?;
        acc += st.accepted as usize;
        x = nx;
        path.push(x);
    }
    Ok(PcnReport {
        budget,
        coupling,
        drift,
        drift_radius,
        lyapunov,
        path,
        acceptance_rate: acc as f64 / config.chain_steps.max(1) as f64,
    })
}
