//! Exact discrete optimal transport by successive shortest paths.

use crate::error::{param, Error, Result};

/// Largest support handled on either side.
pub const MAX_ATOMS: usize = 12;

const MASS_TOL: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub cost: f64,
    /// Row-major n×m coupling.
    pub plan: Vec<Vec<f64>>,
    /// Dual potentials with u_i + v_j ≤ c_ij, equality on the support of the plan.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl TransportPlan {
    pub fn dual_value(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(&self.u).map(|(x, y)| x * y).sum::<f64>() + b.iter().zip(&self.v).map(|(x, y)| x * y).sum::<f64>()
    }
}

/// Minimizes Σ c_ij Γ_ij over couplings of `a` and `b`.
pub fn optimal_transport(a: &[f64], b: &[f64], cost: &[Vec<f64>]) -> Result<TransportPlan> {
    let n = a.len();
    let m = b.len();
    if n == 0 || m == 0 {
        return Err(Error::Empty("transport marginal".into()));
    }
    if n > MAX_ATOMS || m > MAX_ATOMS {
        return Err(Error::SizeLimit(format!("transport with {n}x{m} atoms exceeds {MAX_ATOMS}")));
    }
    if cost.len() != n || cost.iter().any(|r| r.len() != m) {
        return Err(Error::Dimension { expected: n * m, got: cost.iter().map(|r| r.len()).sum() });
    }
    if a.iter().chain(b).any(|x| !(*x >= 0.0 && x.is_finite())) {
        return Err(param("marginals must be finite and nonnegative"));
    }
    let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    if (sa - sb).abs() > 1e-9 * sa.max(sb).max(1.0) {
        return Err(param(format!("marginal masses differ: {sa} vs {sb}")));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("transport cost".into()));
    }

    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut plan = vec![vec![0.0; m]; n];
    // Nodes 0..n are sources, n..n+m sinks.
    let nodes = n + m;
    loop {
        let left: f64 = supply.iter().sum();
        let right: f64 = demand.iter().sum();
        if left.min(right) <= MASS_TOL * sa.max(1.0) {
            break;
        }
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        for i in 0..n {
            if supply[i] > MASS_TOL {
                dist[i] = 0.0;
            }
        }
        for _ in 0..nodes {
            let mut changed = false;
            for i in 0..n {
                if dist[i].is_finite() {
                    for j in 0..m {
                        let d = dist[i] + cost[i][j];
                        if d < dist[n + j] - 1e-15 {
                            dist[n + j] = d;
                            prev[n + j] = i;
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..m {
                if dist[n + j].is_finite() {
                    for i in 0..n {
                        if plan[i][j] > 0.0 {
                            let d = dist[n + j] - cost[i][j];
                            if d < dist[i] - 1e-15 {
                                dist[i] = d;
                                prev[i] = n + j;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let target = (0..m)
            .filter(|&j| demand[j] > MASS_TOL && dist[n + j].is_finite())
            .min_by(|&x, &y| dist[n + x].total_cmp(&dist[n + y]));
        let Some(jt) = target else { break };
        let mut path = vec![n + jt];
        let mut node = n + jt;
        while prev[node] != usize::MAX {
            node = prev[node];
            path.push(node);
            if path.len() > 2 * nodes + 2 {
                return Err(Error::LinearAlgebra("cycle in transport residual graph".into()));
            }
        }
        path.reverse();
        let src = path[0];
        let mut f = supply[src].min(demand[jt]);
        for w in path.windows(2) {
            if w[0] >= n {
                f = f.min(plan[w[1]][w[0] - n]);
            }
        }
        if !(f > 0.0) {
            break;
        }
        supply[src] -= f;
        demand[jt] -= f;
        for w in path.windows(2) {
            if w[0] < n {
                plan[w[0]][w[1] - n] += f;
            } else {
                let r = &mut plan[w[1]][w[0] - n];
                *r = (*r - f).max(0.0);
            }
        }
    }

    let total = plan.iter().flatten().zip(cost.iter().flatten()).map(|(p, c)| p * c).sum();
    let (u, v) = potentials(&plan, cost);
    Ok(TransportPlan { cost: total, plan, u, v })
}

fn potentials(plan: &[Vec<f64>], cost: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = plan.len();
    let m = plan[0].len();
    let mut du = vec![0.0; n];
    let mut dv = vec![0.0; m];
    for _ in 0..(n + m + 1) {
        let mut changed = false;
        for i in 0..n {
            for j in 0..m {
                if du[i] + cost[i][j] < dv[j] - 1e-15 {
                    dv[j] = du[i] + cost[i][j];
                    changed = true;
                }
                if plan[i][j] > 0.0 && dv[j] - cost[i][j] < du[i] - 1e-15 {
                    du[i] = dv[j] - cost[i][j];
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (du.iter().map(|d| -d).collect(), dv)
}
