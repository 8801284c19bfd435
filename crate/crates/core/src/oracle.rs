//! Brute-force reference computations. Nothing here shares code with the
//! solvers it checks.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mdp::{policy_evaluation_direct, Policy, TabularMdp};

/// Largest support the exhaustive transport search accepts per side.
pub const MAX_EXHAUSTIVE_ATOMS: usize = 4;

/// Exact W1 by enumerating every basic solution of the transportation
/// polytope: each vertex is supported on a spanning tree of the complete
/// bipartite graph, and the tree fixes the flow by peeling leaves.
pub fn exhaustive_w1(a: &[f64], b: &[f64], cost: &Array2<f64>) -> Result<f64> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 || m > MAX_EXHAUSTIVE_ATOMS || n > MAX_EXHAUSTIVE_ATOMS {
        return Err(Error::Input(format!("exhaustive search needs 1..=4 atoms per side, got {m} x {n}")));
    }
    if cost.dim() != (m, n) {
        return Err(Error::Input(format!("cost is {:?}, expected ({m}, {n})", cost.dim())));
    }
    let edges: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << edges.len()) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let tree: Vec<(usize, usize)> = (0..edges.len()).filter(|e| mask >> e & 1 == 1).map(|e| edges[e]).collect();
        if let Some(flow) = tree_flow(a, b, &tree) {
            if flow.iter().all(|&(_, f)| f >= -1e-12) {
                let c: f64 = flow.iter().map(|&((i, j), f)| f * cost[[i, j]]).sum();
                best = best.min(c);
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Input("no feasible basis; masses must balance".into()))
    }
}

/// Flow on a bipartite spanning tree meeting the marginals, or `None` if
/// the edge set is not a spanning tree.
fn tree_flow(a: &[f64], b: &[f64], tree: &[(usize, usize)]) -> Option<Vec<((usize, usize), f64)>> {
    let m = a.len();
    let nodes = m + b.len();
    let mut residual: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut alive = vec![true; tree.len()];
    let mut degree = vec![0usize; nodes];
    for &(i, j) in tree {
        degree[i] += 1;
        degree[m + j] += 1;
    }
    if degree.iter().any(|&d| d == 0) {
        return None;
    }
    let mut flow = Vec::with_capacity(tree.len());
    for _ in 0..tree.len() {
        let leaf = (0..nodes).find(|&v| degree[v] == 1)?;
        let e = (0..tree.len()).find(|&e| alive[e] && (tree[e].0 == leaf || m + tree[e].1 == leaf))?;
        let (i, j) = tree[e];
        let other = if leaf == i { m + j } else { i };
        let f = residual[leaf];
        flow.push(((i, j), f));
        residual[other] -= f;
        residual[leaf] = 0.0;
        alive[e] = false;
        degree[leaf] -= 1;
        degree[other] -= 1;
    }
    // An acyclic edge set of size nodes - 1 is a spanning tree; a cycle
    // would have stalled the peeling above.
    Some(flow)
}

/// Sample mean of `|N(m, v)|`.
pub fn folded_normal_mc(m: f64, v: f64, samples: usize, seed: u64) -> f64 {
    if v == 0.0 {
        return m.abs();
    }
    let normal = Normal::new(m, v.sqrt()).expect("finite moments");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).map(|_| normal.sample(&mut rng).abs()).sum::<f64>() / samples as f64
}

/// Sample mean of `|X - Y|` for independent `X ~ N(mu1, s1^2)`, `Y ~ N(mu2, s2^2)`.
pub fn abs_difference_mc(mu1: f64, s1: f64, mu2: f64, s2: f64, samples: usize, seed: u64) -> f64 {
    let x = Normal::new(mu1, s1).expect("finite moments");
    let y = Normal::new(mu2, s2).expect("finite moments");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| (x.sample(&mut rng) - y.sample(&mut rng)).abs())
        .sum::<f64>()
        / samples as f64
}

/// Central differences `(f(x + h e_k) - f(x - h e_k)) / 2h`.
pub fn finite_difference_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Every deterministic policy as an action list, in lexicographic order.
pub fn deterministic_policies(n_states: usize, n_actions: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = (n_actions as u64).checked_pow(n_states as u32).unwrap_or(u64::MAX);
    (0..total).map(move |mut code| {
        let mut acts = vec![0; n_states];
        for slot in acts.iter_mut().rev() {
            *slot = (code % n_actions as u64) as usize;
            code /= n_actions as u64;
        }
        acts
    })
}

/// `V*` as the state-wise maximum of direct policy evaluations over every
/// deterministic policy.
pub fn brute_force_optimal_values(mdp: &TabularMdp) -> Result<Array1<f64>> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    if (m as f64).powi(n as i32) > 1e6 {
        return Err(Error::Input(format!("{m}^{n} policies is too many to enumerate")));
    }
    let mut best = Array1::from_elem(n, f64::NEG_INFINITY);
    for acts in deterministic_policies(n, m) {
        let v = policy_evaluation_direct(mdp, &Policy::deterministic(&acts, m)?)?;
        best.zip_mut_with(&v, |b, x| *b = b.max(*x));
    }
    Ok(best)
}
