use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{Cholesky, DMatrix, DVector};
use perturb_core::bounds::w1_time_avg_bound;
use perturb_core::gp::{
    adaptive_rank, decompose, low_rank_accept, phi_derivative, run_bounded, run_pcn, synthetic_gp, BoundedConfig,
    Convention, GPData, PcnConfig,
};
use perturb_core::logistic::{figure1_experiment, grad_log_target, Figure1Config, LogisticData};
use perturb_core::lyapunov::{confidence_for_sigmas, verify_drift};
use perturb_core::oracle::{ar1_pair, bound_audit_many, Ar1Config, AuditConfig};
use perturb_core::probit::{
    drift_probe_states, exact_gibbs_step, pinsker_tv_bound, probit_drift_constants_with, synthetic_probit, GibbsMode,
    ProbitData, ProbitKernel, ProbitState,
};
use perturb_core::{RandomSource, StateVector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = fn() -> Outcome;

fn oracle_bound_audit() -> Outcome {
    let seeds: Vec<u64> = (0..100).collect();
    let reports = bound_audit_many(&seeds, &AuditConfig::default()).expect("audit runs");
    let rows: usize = reports.iter().map(|r| r.rows.len()).sum();
    let worst = reports.iter().flat_map(|r| &r.rows).map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let failed: Vec<String> =
        reports.iter().flat_map(|r| r.violations().into_iter().map(move |v| format!("seed {} {}", r.seed, v.bound_id))).collect();
    let pass = reports.len() >= 100 && rows > 0 && worst >= -1e-8 && failed.is_empty();
    outcome(pass, format!("{} pairs, {rows} rows, worst margin {worst:.3e}, violations {}", reports.len(), failed.len()))
}

fn probit_probes(data: &ProbitData) -> Vec<DVector<f64>> {
    let mut probes = Vec::with_capacity(200);
    let rays = drift_probe_states(data);
    let stride = (rays.len() / 100).max(1);
    probes.extend(rays.iter().step_by(stride).take(100).cloned());
    let mut rng = RandomSource::new(17, 0);
    let mut s = ProbitState::zeros(data.dim());
    for t in 0..2200 {
        s = exact_gibbs_step(data, &s, &mut rng).expect("gibbs step");
        if t >= 200 && t % 20 == 0 && probes.len() < 200 {
            probes.push(s.x.clone());
        }
    }
    probes
}

fn probit_drift() -> Outcome {
    let (data, _) = synthetic_probit(50, 3, 30, 11).expect("data");
    let probes = probit_probes(&data);
    let cert = probit_drift_constants_with(&data, &probes).expect("certificate");
    let gamma_ok = (cert.gamma - (1.0 - 1.0 / 30.0)).abs() < 1e-12;
    let states: Vec<StateVector> =
        probes.iter().map(|p| StateVector::new(p.as_slice().to_vec()).expect("finite state")).collect();
    let data = Arc::new(data);
    let conf = confidence_for_sigmas(3.0);
    let mut rng = RandomSource::new(2024, 0);
    let mut detail = format!("{} probes, gamma {:.5}, K {:.4}", states.len(), cert.gamma, cert.k);
    let mut pass = gamma_ok && states.len() == 200;
    for mode in [GibbsMode::Exact, GibbsMode::Approximate] {
        let kernel = ProbitKernel::new(data.clone(), mode);
        let audit = verify_drift(&cert, &kernel, &states, 500, conf, &mut rng).expect("drift audit");
        pass &= audit.passed();
        detail.push_str(&format!(", {mode:?} violations {}", audit.violations()));
    }
    outcome(pass, detail)
}

fn pinsker_scaling() -> Outcome {
    let (base, truth) = synthetic_probit(50, 3, 30, 11).expect("data");
    let w = base.design().clone();
    let xi = &w * &truth;
    let state = ProbitState::new(truth.clone());
    let ms = [10u32, 100, 1000];
    let mut pts = Vec::new();
    for &m in &ms {
        let z: Vec<u32> = xi
            .iter()
            .map(|&e| {
                let p = 0.5 * erfc_approx(-e / std::f64::consts::SQRT_2);
                ((p * m as f64).round() as u32).clamp(1, m - 1)
            })
            .collect();
        let data = ProbitData::new(w.clone(), z, vec![m; w.nrows()]).expect("data");
        let b = pinsker_tv_bound(&data, &state).expect("bound");
        pts.push(((m as f64).ln(), b.ln()));
    }
    let slope = ls_slope(&pts);
    let bounds: Vec<String> = pts.iter().map(|p| format!("{:.4}", p.1.exp())).collect();
    outcome((slope + 0.5).abs() <= 0.05, format!("bounds [{}], slope {slope:.4}, expected -0.5 +/- 0.05", bounds.join(", ")))
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

// Abramowitz-Stegun 7.1.26.
fn erfc_approx(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.3275911 * x.abs());
    let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let e = poly * (-x * x).exp();
    if x >= 0.0 { e } else { 2.0 - e }
}

fn figure1_desk() -> Outcome {
    let n = 10_000;
    let grid: Vec<usize> = [0.1, 0.3, 0.5, 0.7, 0.9].iter().map(|f| (f * n as f64) as usize).collect();
    let cfg = Figure1Config { n, p: 2, eps: 0.1, n0_grid: grid.clone(), steps: 10_000, ..Figure1Config::default() };
    let res = figure1_experiment(&cfg).expect("experiment");
    let curves: Vec<Vec<f64>> = grid.iter().map(|&k| res.curve(k).iter().map(|c| c.p_hat).collect()).collect();
    let samples_ok = grid.iter().all(|&k| res.rows.iter().filter(|r| r.n0 == k).count() == 10_000);
    let points = curves[0].len();
    let mut monotone = points > 0;
    for g in 0..points {
        for w in curves.windows(2) {
            monotone &= w[1][g] > w[0][g];
        }
    }
    let near0 = curves.iter().map(|c| c[0]).collect::<Vec<_>>();
    let center_ok = near0[2] < near0[4];
    let shown: Vec<String> = near0.iter().map(|v| format!("{v:.3}")).collect();
    outcome(
        samples_ok && monotone && center_ok,
        format!("{points} grid points, monotone {monotone}, near D=0 [{}], pilot acceptance {:.2}", shown.join(", "), res.pilot_acceptance),
    )
}

fn ar1_time_average() -> Outcome {
    let pair = ar1_pair(&Ar1Config::default()).expect("pair");
    let start = pair.exact.len() / 2;
    let mut rng = RandomSource::new(5, 0);
    let mut pass = true;
    let mut parts = vec![format!("alpha_bar {:.4}, eps {:.4}", pair.alpha_bar, pair.eps)];
    for n in [10, 100, 1000] {
        let bound = w1_time_avg_bound(n, pair.eps, pair.alpha_bar).expect("bound");
        let sim = pair.simulated_bias(start, n, 200, &mut rng).expect("simulation");
        let exact = pair.exact_bias(start, n).expect("exact bias");
        pass &= sim.mean.abs() <= bound && exact.abs() <= bound;
        parts.push(format!("n={n}: |bias| {:.4} (exact {:.4}) <= {bound:.4}", sim.mean.abs(), exact.abs()));
    }
    outcome(pass, parts.join("; "))
}

fn gp_discretization() -> Outcome {
    let b = run_bounded(&BoundedConfig::default()).expect("bounded run");
    let snap_ok = b.max_snap_error <= 0.5 * b.grid_spacing + 1e-12;
    assert!(b.max_w1 <= b.w1_limit + 1e-12, "snap coupling exceeds h/(2 delta)");
    let p = run_pcn(&PcnConfig::default()).expect("pcn run");
    let worst = p.coupling.iter().map(|c| c.mean - c.bound - 3.0 * c.se).fold(f64::NEG_INFINITY, f64::max);
    outcome(
        snap_ok && b.max_w1 <= b.w1_limit && p.coupling_passed(),
        format!(
            "snap W1 {:.4} <= {:.4}; pCN eps {:.4}, worst mean - bound - 3se {worst:.4} over {} probes",
            b.max_w1,
            b.w1_limit,
            p.budget.eps,
            p.coupling.len()
        ),
    )
}

fn low_rank_adaptive() -> Outcome {
    let data = synthetic_gp(200, 1, 1.0, 1.0, Convention::Linear, 5).expect("data");
    let sx = decompose(&data.kernel_matrix(1.0)).expect("spectrum");
    let sy = decompose(&data.kernel_matrix(1.5)).expect("spectrum");
    let eps = 1e-3;
    let r = adaptive_rank(&data, &sx, &sy, eps).expect("rank");
    let exact = low_rank_accept(&data, &sx, &sy, data.n()).expect("alpha");
    let approx = low_rank_accept(&data, &sx, &sy, r).expect("alpha_r");
    let err = (exact - approx).abs();
    outcome(r < data.n() && err < eps, format!("r = {r} of {}, |alpha - alpha_r| = {err:.2e}", data.n()))
}

fn logistic_oracle(w: &DMatrix<f64>, z: &[u8], prec: &DMatrix<f64>, x: &[f64]) -> f64 {
    let xv = DVector::from_column_slice(x);
    let eta = w * &xv;
    let ll: f64 = eta.iter().zip(z).map(|(&e, &zi)| zi as f64 * e - (1.0 + e.exp()).ln()).sum();
    ll - 0.5 * xv.dot(&(prec * &xv))
}

fn phi_oracle(x: f64, locs: &[f64], z: &[f64]) -> f64 {
    let n = locs.len();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let k = (-x * x * (locs[i] - locs[j]).powi(2)).exp();
        if i == j { 1.0 + k } else { k }
    });
    let c = Cholesky::new(m).expect("positive definite");
    let logdet: f64 = 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let zv = DVector::from_column_slice(z);
    let q = zv.dot(&c.solve(&zv));
    0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet) + 0.5 * q
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn derivative_checks() -> Outcome {
    let mut rng = RandomSource::new(8, 0);
    let (n, p) = (300, 3);
    let w = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.normal() });
    let z: Vec<u8> = (0..n).map(|_| (rng.uniform() < 0.4) as u8).collect();
    let cov = DMatrix::from_diagonal_element(p, p, 4.0);
    let prec = DMatrix::from_diagonal_element(p, p, 0.25);
    let data = LogisticData::new(&w, &z, DVector::zeros(p), cov).expect("data");
    let h = 1e-5;
    let mut worst_l = 0.0f64;
    for _ in 0..50 {
        let x: Vec<f64> = (0..p).map(|_| 2.0 * rng.normal()).collect();
        let g = grad_log_target(&data, &x).expect("gradient");
        for j in 0..p {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            let fd = (logistic_oracle(&w, &z, &prec, &xp) - logistic_oracle(&w, &z, &prec, &xm)) / (2.0 * h);
            worst_l = worst_l.max(rel_err(g[j], fd));
        }
    }
    let locs: Vec<f64> = (0..40).map(|_| rng.uniform()).collect();
    let zs: Vec<f64> = (0..40).map(|_| rng.normal()).collect();
    let gp = GPData::new(locs.iter().map(|&s| vec![s]).collect(), zs.clone()).expect("gp data");
    let mut worst_p = 0.0f64;
    for _ in 0..50 {
        let x = 0.2 + 4.0 * rng.uniform();
        let d = phi_derivative(x, &gp).expect("derivative");
        let fd = (phi_oracle(x + h, &locs, &zs) - phi_oracle(x - h, &locs, &zs)) / (2.0 * h);
        worst_p = worst_p.max(rel_err(d, fd));
    }
    outcome(worst_l <= 1e-6 && worst_p <= 1e-6, format!("worst relative error: logistic {worst_l:.2e}, pCN {worst_p:.2e}"))
}

fn lyapunov_discretized() -> Outcome {
    let r = run_pcn(&PcnConfig::default()).expect("pcn run");
    let l = &r.lyapunov;
    outcome(
        l.passed() && l.factor < 1.0,
        format!(
            "gamma e^eps = {:.4}, max log ratio {:.4} <= eps {:.4}, K {:.3}, {} probes",
            l.factor,
            l.max_log_ratio,
            l.eps,
            r.drift.k,
            l.probes.len()
        ),
    )
}

fn main() -> ExitCode {
    let checks: [(&str, Check, u64); 9] = [
        ("oracle bound audit", oracle_bound_audit, 120),
        ("probit drift", probit_drift, 60),
        ("pinsker scaling", pinsker_scaling, 1),
        ("minibatch figure at desk scale", figure1_desk, 600),
        ("wasserstein time-average bound", ar1_time_average, 120),
        ("gp discretization", gp_discretization, 180),
        ("low-rank adaptive rank", low_rank_adaptive, 60),
        ("gradient and derivative checks", derivative_checks, 10),
        ("lyapunov under discretization", lyapunov_discretized, 60),
    ];
    let mut failures = 0;
    for (i, (name, check, budget)) in checks.iter().enumerate() {
        let t0 = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(check));
        let dt = t0.elapsed();
        let (pass, detail) = match res {
            Ok(o) => (o.pass, o.detail),
            Err(e) => {
                let msg = e
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| e.downcast_ref::<String>().cloned())
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        let in_time = dt <= Duration::from_secs(*budget);
        let ok = pass && in_time;
        failures += !ok as usize;
        println!(
            "{} {} {name}: {detail} [{:.2}s of {budget}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            dt.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failures} failed", checks.len() - failures);
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
