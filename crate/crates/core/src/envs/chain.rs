use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// A deterministic chain of `n` states with `left`/`right` actions. The last
/// state is absorbing and only the transition into it pays `goal_reward`:
/// `r(n-2, right) = goal_reward`, every other reward is zero.
pub fn sparse_chain_mdp(n: usize, goal_reward: f64, gamma: f64) -> Result<TabularMdp> {
    if n < 2 {
        return Err(Error::Config(format!("chain needs at least 2 states, got {n}")));
    }
    let mut t = Array3::zeros((n, 2, n));
    let mut r = Array2::zeros((n, 2));
    for s in 0..n {
        if s == n - 1 {
            t[[s, LEFT, s]] = 1.0;
            t[[s, RIGHT, s]] = 1.0;
            continue;
        }
        t[[s, LEFT, s.saturating_sub(1)]] = 1.0;
        t[[s, RIGHT, s + 1]] = 1.0;
    }
    r[[n - 2, RIGHT]] = goal_reward;
    TabularMdp::new(t, r, gamma)
}

/// Reward-free chain with the same dynamics, used for degenerate-reward
/// checks.
pub fn reward_free_chain(n: usize, gamma: f64) -> Result<TabularMdp> {
    sparse_chain_mdp(n, 0.0, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{policy_evaluation_direct, value_iteration, Policy, SolveOptions};

    #[test]
    fn optimal_policy_walks_right() {
        let mdp = sparse_chain_mdp(6, 1.0, 0.9).unwrap();
        let q = value_iteration(&mdp, SolveOptions::default()).unwrap();
        let greedy = q.greedy_actions().unwrap();
        assert!(greedy[..5].iter().all(|&a| a == RIGHT));
        let v = policy_evaluation_direct(&mdp, &Policy::deterministic(&greedy, 2).unwrap()).unwrap();
        assert!((v[4] - 1.0).abs() < 1e-9);
        assert!((v[0] - 0.9f64.powi(4)).abs() < 1e-9);
    }

    #[test]
    fn rejects_single_state() {
        assert!(sparse_chain_mdp(1, 1.0, 0.9).is_err());
    }
}
