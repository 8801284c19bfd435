//! Exact 1-Wasserstein distances between finite discrete distributions.
//!
//! The transportation problem is solved as a min-cost flow with successive
//! shortest augmenting paths. Node potentials keep every reduced cost
//! nonnegative, so each path is found with a dense Dijkstra, and the final
//! potentials are an optimal dual solution.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::mdp::PROB_TOL;

/// Masses below this are treated as exhausted.
const MASS_EPS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    support: Vec<usize>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates and drops zero-weight atoms.
    pub fn new(support: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::Input(format!(
                "support has {} atoms but {} weights",
                support.len(),
                weights.len()
            )));
        }
        let mut seen = support.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Input("support indices must be distinct".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Input(format!("weight {w} is not a probability")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::Input(format!("weights sum to {total}, expected 1")));
        }
        let (support, weights) = support
            .into_iter()
            .zip(weights)
            .filter(|&(_, w)| w > 0.0)
            .unzip();
        Ok(Self { support, weights })
    }

    /// From a dense probability vector indexed by state.
    pub fn from_dense(probs: &[f64]) -> Result<Self> {
        Self::new((0..probs.len()).collect(), probs.to_vec())
    }

    pub fn point(index: usize) -> Self {
        Self {
            support: vec![index],
            weights: vec![1.0],
        }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Nonnegative ground cost indexed by the distributions' support ids.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Array2<f64>,
}

impl CostMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if let Some(c) = entries.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::Input(format!("cost entry {c} must be finite and nonnegative")));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[[i, j]]
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn transpose(&self) -> Self {
        Self {
            entries: self.entries.t().to_owned(),
        }
    }
}

/// Optimal plan plus the dual potentials certifying it.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub cost: f64,
    /// `(support index in mu, support index in nu, mass)` for nonzero flows.
    pub plan: Vec<(usize, usize, f64)>,
    /// Source potentials `f_i`; the duals satisfy `g_j - f_i <= c_ij`.
    pub source_potential: Vec<f64>,
    pub sink_potential: Vec<f64>,
}

impl TransportSolution {
    /// `sum_j b_j g_j - sum_i a_i f_i`.
    pub fn dual_objective(&self, mu: &[f64], nu: &[f64]) -> f64 {
        let sinks: f64 = nu.iter().zip(&self.sink_potential).map(|(b, g)| b * g).sum();
        let sources: f64 = mu.iter().zip(&self.source_potential).map(|(a, f)| a * f).sum();
        sinks - sources
    }

    /// Largest violation of `g_j - f_i <= c_ij` (zero when dual feasible).
    pub fn dual_violation(&self, cost: impl Fn(usize, usize) -> f64) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, f) in self.source_potential.iter().enumerate() {
            for (j, g) in self.sink_potential.iter().enumerate() {
                worst = worst.max(g - f - cost(i, j));
            }
        }
        worst
    }
}

/// Exact W1 between `mu` and `nu` under `cost`.
pub fn w1_discrete(mu: &DiscreteDistribution, nu: &DiscreteDistribution, cost: &CostMatrix) -> Result<f64> {
    Ok(solve_transport(mu, nu, cost)?.cost)
}

pub fn solve_transport(
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    cost: &CostMatrix,
) -> Result<TransportSolution> {
    let (rows, cols) = cost.entries.dim();
    if mu.support.iter().any(|&i| i >= rows) || nu.support.iter().any(|&j| j >= cols) {
        return Err(Error::Input(format!(
            "cost matrix is {rows}x{cols} but supports reach beyond it"
        )));
    }
    transport_weights(&mu.weights, &nu.weights, |i, j| {
        cost.entries[[mu.support[i], nu.support[j]]]
    })
}

/// W1 between two dense probability rows over the same index set, with the
/// ground cost read from `cost[[i, j]]`. Zero-weight atoms are skipped and
/// point masses take a closed-form shortcut. Inputs are trusted.
pub(crate) fn w1_dense_rows(mu: &[f64], nu: &[f64], cost: &Array2<f64>) -> f64 {
    let src: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > 0.0).collect();
    let dst: Vec<usize> = (0..nu.len()).filter(|&j| nu[j] > 0.0).collect();
    if src.len() == 1 {
        return dst.iter().map(|&j| nu[j] * cost[[src[0], j]]).sum();
    }
    if dst.len() == 1 {
        return src.iter().map(|&i| mu[i] * cost[[i, dst[0]]]).sum();
    }
    let a: Vec<f64> = src.iter().map(|&i| mu[i]).collect();
    let b: Vec<f64> = dst.iter().map(|&j| nu[j]).collect();
    // Supports come from validated rows, so the solve cannot fail.
    transport_weights(&a, &b, |i, j| cost[[src[i], dst[j]]])
        .map(|s| s.cost)
        .unwrap_or(f64::NAN)
}

/// Successive shortest paths on the bipartite transport network.
pub fn transport_weights(a: &[f64], b: &[f64], cost: impl Fn(usize, usize) -> f64) -> Result<TransportSolution> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::Input("empty distribution".into()));
    }
    let total_a: f64 = a.iter().sum();
    let total_b: f64 = b.iter().sum();
    if (total_a - 1.0).abs() > PROB_TOL || (total_b - 1.0).abs() > PROB_TOL {
        return Err(Error::Input(format!(
            "infeasible marginals: masses {total_a} and {total_b}"
        )));
    }

    let c: Vec<f64> = (0..n * m).map(|k| cost(k / m, k % m)).collect();
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut flow = vec![0.0; n * m];
    // Nodes 0..n are sources, n..n+m sinks.
    let mut pot = vec![0.0; n + m];
    let mut dist = vec![0.0; n + m];
    let mut prev = vec![usize::MAX; n + m];
    let mut done = vec![false; n + m];

    let max_rounds = 4 * (n + m) * (n + m) + 16;
    for _ in 0..max_rounds {
        if !supply.iter().any(|&s| s > MASS_EPS) || !demand.iter().any(|&d| d > MASS_EPS) {
            break;
        }
        dist.fill(f64::INFINITY);
        prev.fill(usize::MAX);
        done.fill(false);
        for i in 0..n {
            if supply[i] > MASS_EPS {
                dist[i] = 0.0;
            }
        }
        let target = loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..n + m {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break None;
            }
            done[u] = true;
            if u >= n {
                let j = u - n;
                if demand[j] > MASS_EPS {
                    break Some(u);
                }
                for i in 0..n {
                    if !done[i] && flow[i * m + j] > MASS_EPS {
                        let rc = (-c[i * m + j] + pot[u] - pot[i]).max(0.0);
                        if dist[u] + rc < dist[i] {
                            dist[i] = dist[u] + rc;
                            prev[i] = u;
                        }
                    }
                }
            } else {
                for j in 0..m {
                    let v = n + j;
                    if !done[v] {
                        let rc = (c[u * m + j] + pot[u] - pot[v]).max(0.0);
                        if dist[u] + rc < dist[v] {
                            dist[v] = dist[u] + rc;
                            prev[v] = u;
                        }
                    }
                }
            }
        };
        let Some(t) = target else {
            break;
        };
        let cap = dist[t];
        for v in 0..n + m {
            pot[v] += dist[v].min(cap);
        }

        // Walk back to the originating source to find the bottleneck.
        let mut delta = demand[t - n];
        let mut v = t;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                // Backward edge sink u -> source v cancels flow on (v, u).
                delta = delta.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        let source = v;
        delta = delta.min(supply[source]);

        let mut v = t;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                let k = v * m + (u - n);
                flow[k] -= delta;
                if flow[k] <= MASS_EPS {
                    flow[k] = 0.0;
                }
            } else {
                flow[u * m + (v - n)] += delta;
            }
            v = u;
        }
        supply[source] -= delta;
        demand[t - n] -= delta;
    }
    if supply.iter().any(|&s| s > 1e-9) {
        return Err(Error::NotConverged {
            iterations: max_rounds,
            residual: supply.iter().sum(),
        });
    }

    let mut total = 0.0;
    let mut plan = Vec::new();
    for i in 0..n {
        for j in 0..m {
            let f = flow[i * m + j];
            if f > 0.0 {
                total += f * c[i * m + j];
                plan.push((i, j, f));
            }
        }
    }
    Ok(TransportSolution {
        cost: total.max(0.0),
        plan,
        source_potential: pot[..n].to_vec(),
        sink_potential: pot[n..].to_vec(),
    })
}

/// W1 between `dist` and a point mass at `point`, with Euclidean ground cost
/// on `features`. Equals the expected distance to the point.
pub fn w1_to_point(dist: &DiscreteDistribution, features: &[Vec<f64>], point: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (x, w) in dist.iter() {
        let f = features
            .get(x)
            .ok_or_else(|| Error::Input(format!("no feature vector for state {x}")))?;
        total += w * euclidean(f, point)?;
    }
    Ok(total)
}

pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Input(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}
