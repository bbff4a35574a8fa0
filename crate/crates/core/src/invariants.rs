use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::bounds::{finite_time_curve, invariant_gap, invariant_gap_lyapunov, w1_time_avg_bound};
use crate::gp::{adaptive_rank, decompose, gp_log_marginal, gp_log_marginal_dense, low_rank_accept, GPData, GridSpec};
use crate::kernels::theta::{wrapped_gaussian_logdensity_images, wrapped_gaussian_logdensity_theta, Interval};
use crate::kernels::{coupled_step, DecomposedKernel, DiscreteUniformProposal, MetropolisHastings, StateVector};
use crate::logistic::{
    log_target, minibatch_accept, minibatch_mh_step, LogisticData, MinibatchPolicy, SubsetSampler,
};
use crate::metrics::{point_cost, w1_empirical_1d, MetricKind};
use crate::oracle::{optimal_transport, random_chain_pair, stationary_exact};
use crate::probit::{pinsker_tv_bound, trunc_normal_moments, ProbitData, ProbitState, Side};
use crate::rng::RandomSource;

const KINDS: [MetricKind; 4] = [MetricKind::Tv, MetricKind::WeightedTv, MetricKind::CappedW1, MetricKind::Semimetric];

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn small_logistic() -> (LogisticData, DMatrix<f64>, Vec<u8>) {
    let w = DMatrix::from_column_slice(6, 1, &[0.4, -1.1, 0.9, 1.6, -0.3, 0.7]);
    let z = vec![1u8, 0, 1, 1, 0, 0];
    let data = LogisticData::new(&w, &z, DVector::zeros(1), DMatrix::from_element(1, 1, 100.0)).unwrap();
    (data, w, z)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn point_costs_symmetric_zero_on_diagonal(
        beta in 0.0..5.0f64, delta in 0.01..10.0f64, sep in 0.0..20.0f64, vx in 0.0..50.0f64, vy in 0.0..50.0f64,
    ) {
        for kind in KINDS {
            prop_assert_eq!(point_cost(kind, beta, delta, sep, vx, vy), point_cost(kind, beta, delta, sep, vy, vx));
            prop_assert_eq!(point_cost(kind, beta, delta, 0.0, vx, vy), 0.0);
        }
        let capped = point_cost(MetricKind::CappedW1, beta, delta, sep, vx, vy);
        prop_assert!(capped <= 1.0);
        if sep > 0.0 {
            prop_assert!(point_cost(MetricKind::WeightedTv, beta, delta, sep, vx, vy) >= 2.0);
        }
        let s = point_cost(MetricKind::Semimetric, beta, delta, sep, vx, vy);
        let rhs = capped * (2.0 + beta * vx + beta * vy);
        prop_assert!((s * s - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn w1_shift(xs in prop::collection::vec(-5.0..5.0f64, 1..30), ys in prop::collection::vec(-5.0..5.0f64, 1..30), c in -3.0..3.0f64) {
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let same = w1_empirical_1d(&shifted, &xs, None).unwrap();
        prop_assert!((same - c.abs()).abs() <= 1e-12 * (1.0 + c.abs()));
        let a = w1_empirical_1d(&xs, &ys, None).unwrap();
        let b = w1_empirical_1d(&shifted, &ys, None).unwrap();
        prop_assert!((a - b).abs() <= c.abs() + 1e-12);
    }

    #[test]
    fn theta_and_image_forms_agree(lo in -3.0..3.0f64, len in 0.5..8.0f64, fx in 0.0..1.0f64, fy in 0.0..1.0f64, v in 0.02..4.0f64) {
        let s = Interval::new(lo, lo + len).unwrap();
        let (x, y) = (lo + fx * len * 0.999, lo + fy * len * 0.999);
        let a = wrapped_gaussian_logdensity_theta(x, y, v * len * len, &s).unwrap();
        let b = wrapped_gaussian_logdensity_images(x, y, v * len * len, &s).unwrap();
        prop_assert!((a.exp() - b.exp()).abs() <= 1e-12 * a.exp().max(1.0 / len), "{a} vs {b}");
    }

    #[test]
    fn gaps_monotone(eps in 0.0..1.0f64, de in 0.0..0.5f64, a in 0.0..0.9f64, da in 0.0..0.09f64, delta in 0.0..3.0f64, m in 0.0..10.0f64) {
        let base = invariant_gap(eps, a, delta, m).unwrap();
        prop_assert!(invariant_gap(eps + de, a, delta, m).unwrap() >= base);
        prop_assert!(invariant_gap(eps, a + da, delta, m).unwrap() >= base);
        for n in [1usize, 10, 100] {
            let w = w1_time_avg_bound(n, eps, a).unwrap();
            prop_assert!(w1_time_avg_bound(n, eps + de, a).unwrap() >= w);
            prop_assert!(w1_time_avg_bound(n, eps, a + da).unwrap() >= w);
        }
    }

    #[test]
    fn finite_time_reaches_invariant_gap(eps in 0.0..1.0f64, a in 0.0..0.9f64, g in 0.0..0.9f64, delta in 0.0..3.0f64, k in 0.0..5.0f64, mu in 0.0..20.0f64) {
        let c = finite_time_curve(600, eps, delta, a, g, k, mu, 2.0).unwrap();
        let gap = invariant_gap_lyapunov(eps, a, delta, k, g).unwrap();
        let last = *c.sum_form.last().unwrap();
        prop_assert!((last - gap).abs() <= 1e-10 * (1.0 + gap), "{last} vs {gap}");
    }

    #[test]
    fn snap_within_half_spacing(lo in -5.0..5.0f64, len in 0.1..10.0f64, h in 0.001..0.2f64, f in 0.0..1.0f64) {
        let s = Interval::new(lo, lo + len).unwrap();
        let g = GridSpec::covering(&s, h).unwrap();
        prop_assert!(g.spacing() <= h * (1.0 + 1e-12));
        let y = lo + f * len * 0.999_999;
        let (k, p) = g.snap(y);
        prop_assert!(k.is_some());
        prop_assert!((p - y).abs() <= 0.5 * g.spacing() + 1e-12);
    }

    #[test]
    fn transport_beats_product_coupling(seed in 0u64..10_000, n in 2usize..7, m in 2usize..7) {
        let mut rng = RandomSource::new(seed, 0);
        let mut mass = |k: usize| {
            let w: Vec<f64> = (0..k).map(|_| rng.uniform() + 0.05).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let a = mass(n);
        let b = mass(m);
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| 3.0 * rng.uniform()).collect()).collect();
        let plan = optimal_transport(&a, &b, &cost).unwrap();
        let product: f64 = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| a[i] * b[j] * cost[i][j]).sum();
        prop_assert!(plan.cost <= product + 1e-12);
        prop_assert!((plan.dual_value(&a, &b) - plan.cost).abs() <= 1e-9);
    }

    #[test]
    fn stationary_is_fixed_point(seed in 0u64..100_000) {
        let pair = random_chain_pair(seed).unwrap();
        let pi = stationary_exact(&pair.p).unwrap();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let pushed = pair.p.push(&pi);
        prop_assert!(pushed.iter().zip(&pi).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn spectral_marginal_matches_dense(seed in 0u64..10_000, n in 2usize..12, x in 0.1..6.0f64) {
        let mut rng = RandomSource::new(seed, 0);
        let locs: Vec<Vec<f64>> = (0..n).map(|_| vec![2.0 * rng.uniform(), 2.0 * rng.uniform()]).collect();
        let z = rng.normals(n);
        let data = GPData::new(locs, z).unwrap();
        let spec = decompose(&data.kernel_matrix(x)).unwrap();
        let a = gp_log_marginal(&data, &spec).unwrap();
        let b = gp_log_marginal_dense(x, &data).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
    }

    #[test]
    fn adaptive_rank_contract(seed in 0u64..10_000, n in 2usize..25, x in 0.1..6.0f64, y in 0.1..6.0f64, e in 1e-6..1e-1f64) {
        let mut rng = RandomSource::new(seed, 0);
        let locs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.uniform()]).collect();
        let data = GPData::new(locs, rng.normals(n)).unwrap();
        let sx = decompose(&data.kernel_matrix(x)).unwrap();
        let sy = decompose(&data.kernel_matrix(y)).unwrap();
        let r = adaptive_rank(&data, &sx, &sy, e).unwrap();
        prop_assert!(r <= n);
        let exact = low_rank_accept(&data, &sx, &sy, n).unwrap();
        prop_assert!((exact - low_rank_accept(&data, &sx, &sy, r).unwrap()).abs() < e);
    }

    #[test]
    fn truncated_moments_match_quadrature(xi in -5.0..5.0f64) {
        for side in [Side::Positive, Side::Negative] {
            let sgn = if side == Side::Positive { 1.0 } else { -1.0 };
            let hi = (sgn * xi).max(0.0) + 14.0;
            let dens = |t: f64| std_normal_pdf(t - sgn * xi);
            let z = simpson(dens, 0.0, hi, 20_000);
            let m1 = simpson(|t| t * dens(t), 0.0, hi, 20_000) / z;
            let m2 = simpson(|t| t * t * dens(t), 0.0, hi, 20_000) / z;
            let (mean, var) = trunc_normal_moments(xi, side);
            prop_assert!((mean - sgn * m1).abs() <= 1e-8 * (1.0 + m1.abs()), "{side:?} {mean} vs {}", sgn * m1);
            prop_assert!((var - (m2 - m1 * m1)).abs() <= 1e-7, "{side:?} {var} vs {}", m2 - m1 * m1);
        }
    }

    #[test]
    fn full_batch_delta_zero_and_bounded(x in -3.0..3.0f64, y in -3.0..3.0f64, k in 1usize..6, seed in 0u64..1000) {
        let (data, _, _) = small_logistic();
        let all: Vec<usize> = (0..6).collect();
        let exact = (log_target(&data, &[y]).unwrap() - log_target(&data, &[x]).unwrap()).exp().min(1.0);
        let full = minibatch_accept(&data, &all, &[x], &[y]).unwrap();
        prop_assert!((exact - full).abs() <= 1e-12);
        let mut s = SubsetSampler::new(MinibatchPolicy { n0: k, resample: true }, 6, RandomSource::new(seed, 0)).unwrap();
        let a = s.next_subset().to_vec();
        let d = exact - minibatch_accept(&data, &a, &[x], &[y]).unwrap();
        prop_assert!(d.abs() <= 1.0);
    }
}

fn chi2_stat(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    counts.iter().zip(probs).map(|(&c, &p)| (c as f64 - n as f64 * p).powi(2) / (n as f64 * p)).sum()
}

fn chi2_critical(df: usize) -> f64 {
    ChiSquared::new(df as f64).unwrap().inverse_cdf(0.999)
}

fn five_point(weights: [f64; 5]) -> MetropolisHastings<impl Fn(&[f64]) -> f64, DiscreteUniformProposal> {
    MetropolisHastings::new("five-point", move |x: &[f64]| weights[x[0] as usize].ln(), DiscreteUniformProposal { n: 5 })
}

fn exact_row(w: &[f64; 5], x: usize) -> Vec<f64> {
    let mut row: Vec<f64> = (0..5).map(|y| if y == x { 0.0 } else { 0.2 * (w[y] / w[x]).min(1.0) }).collect();
    row[x] = 1.0 - row.iter().sum::<f64>();
    row
}

#[test]
fn mh_detailed_balance_on_five_points() {
    let k = five_point([1.0, 2.0, 3.0, 4.0, 5.0]);
    let mut rng = RandomSource::new(41, 0);
    let mut x = StateVector::scalar(0.0);
    let mut c = [[0usize; 5]; 5];
    for _ in 0..200_000 {
        let y = k.step_outcome(&x, &mut rng).unwrap().state;
        c[x[0] as usize][y[0] as usize] += 1;
        x = y;
    }
    for i in 0..5 {
        for j in i + 1..5 {
            let (a, b) = (c[i][j] as f64, c[j][i] as f64);
            assert!((a - b).abs() <= 4.0 * (a + b).sqrt(), "flux {i}->{j} {a} vs {b}");
        }
    }
}

#[test]
fn coupled_marginals_match_single_kernels() {
    let (wp, wq) = ([1.0, 2.0, 3.0, 4.0, 5.0], [5.0, 1.0, 1.0, 2.0, 4.0]);
    let (p, q) = (five_point(wp), five_point(wq));
    let x = StateVector::scalar(2.0);
    let mut rng = RandomSource::new(43, 0);
    let (mut cp, mut cq) = ([0usize; 5], [0usize; 5]);
    for _ in 0..40_000 {
        let ((a, b), _) = coupled_step(&p, &q, &x, &x, crate::kernels::euclidean, &mut rng).unwrap();
        cp[a[0] as usize] += 1;
        cq[b[0] as usize] += 1;
    }
    let crit = chi2_critical(4);
    assert!(chi2_stat(&cp, &exact_row(&wp, 2)) < crit);
    assert!(chi2_stat(&cq, &exact_row(&wq, 2)) < crit);
}

fn oracle_minibatch_target(w: &DMatrix<f64>, z: &[u8], a: &[usize], x: f64) -> f64 {
    let scale = w.nrows() as f64 / a.len() as f64;
    let ll: f64 = a
        .iter()
        .map(|&i| {
            let e = w[(i, 0)] * x;
            z[i] as f64 * e - (1.0 + e.exp()).ln()
        })
        .sum();
    scale * ll - 0.5 * x * x / 100.0
}

#[test]
fn resampled_minibatch_is_subset_mixture() {
    let (data, w, z) = small_logistic();
    let subsets: Vec<Vec<usize>> = (0..6)
        .flat_map(|i| (i + 1..6).flat_map(move |j| (j + 1..6).map(move |k| vec![i, j, k])))
        .collect();
    assert_eq!(subsets.len(), 20);
    let (x, tau) = (0.3, 0.8);
    let mixture = |y: f64| {
        subsets
            .iter()
            .map(|a| (oracle_minibatch_target(&w, &z, a, y) - oracle_minibatch_target(&w, &z, a, x)).exp().min(1.0))
            .sum::<f64>()
            / 20.0
    };
    let cuts = [-8.0, -1.0, -0.3, 0.3, 1.0, 8.0];
    let mut probs: Vec<f64> = cuts
        .windows(2)
        .map(|c| simpson(|t| std_normal_pdf(t) * mixture(x + tau * t), c[0], c[1], 4000))
        .collect();
    probs.insert(0, 1.0 - probs.iter().sum::<f64>());
    let mut sampler = SubsetSampler::new(MinibatchPolicy { n0: 3, resample: true }, 6, RandomSource::new(7, 1)).unwrap();
    let mut rng = RandomSource::new(7, 0);
    let mut counts = vec![0usize; 6];
    for _ in 0..60_000 {
        let (next, s) = minibatch_mh_step(&data, &mut sampler, &[x], tau, &mut rng).unwrap();
        let bin = if !s.accepted {
            0
        } else {
            let t = (next[0] - x) / tau;
            1 + cuts[1..5].iter().filter(|&&c| t >= c).count()
        };
        counts[bin] += 1;
    }
    assert!(chi2_stat(&counts, &probs) < chi2_critical(5), "{counts:?} vs {probs:?}");
}

#[test]
fn subsets_are_uniform() {
    let mut s = SubsetSampler::new(MinibatchPolicy { n0: 3, resample: true }, 6, RandomSource::new(9, 0)).unwrap();
    let mut counts = std::collections::HashMap::new();
    for _ in 0..40_000 {
        let mut a = s.next_subset().to_vec();
        a.sort_unstable();
        *counts.entry(a).or_insert(0usize) += 1;
    }
    assert_eq!(counts.len(), 20);
    let c: Vec<usize> = counts.into_values().collect();
    assert!(chi2_stat(&c, &[0.05; 20]) < chi2_critical(19));
}

#[test]
fn pinsker_bound_invariant_when_counts_scale() {
    let w = DMatrix::from_row_slice(4, 2, &[1.0, 0.3, 1.0, -0.8, 1.0, 1.4, 1.0, 0.1]);
    let state = ProbitState::new(DVector::from_vec(vec![0.2, -0.4]));
    let vals: Vec<f64> = [10u32, 100, 1000]
        .iter()
        .map(|&m| {
            let data = ProbitData::new(w.clone(), vec![m / 2; 4], vec![m; 4]).unwrap();
            pinsker_tv_bound(&data, &state).unwrap()
        })
        .collect();
    assert!(vals.windows(2).all(|v| (v[0] - v[1]).abs() <= 1e-12 * v[0]), "{vals:?}");
}
