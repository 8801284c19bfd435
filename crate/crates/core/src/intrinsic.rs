//! Anchors, the metric-based potential and potential-difference shaping.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{value_iteration, SolveOptions, TabularMdp};
use crate::reward_model::{EmpiricalTransitionModel, GaussianRewardModel, TransitionRecord};
use crate::transport::{w1_to_point, DiscreteDistribution};

/// Batch-averaged pseudo-state the potential measures distance to.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub r_star: f64,
    pub z_star: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorPolicy {
    /// Mean reward and mean predicted next feature over the batch.
    #[default]
    BatchMean,
    /// Batch-mean reward, but the feature of the episode's initial state.
    FixedInitialState,
    /// A single uniformly drawn batch element.
    RandomBatchElement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapingConfig {
    pub eta: f64,
    pub gamma: f64,
    pub c_r: f64,
    pub c_t: f64,
    #[serde(default)]
    pub anchor_policy: AnchorPolicy,
}

impl ShapingConfig {
    /// `c_R = 1`, `c_T = gamma`.
    pub fn new(eta: f64, gamma: f64) -> Self {
        Self {
            eta,
            gamma,
            c_r: 1.0,
            c_t: gamma,
            anchor_policy: AnchorPolicy::BatchMean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::Config(format!("eta must be finite and nonnegative, got {}", self.eta)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.c_r > 0.0) || !(0.0..1.0).contains(&self.c_t) {
            return Err(Error::Config(format!(
                "need c_R > 0 and c_T in [0, 1), got ({}, {})",
                self.c_r, self.c_t
            )));
        }
        Ok(())
    }
}

/// What the potential needs from the learned models.
pub trait WorldModel {
    type State: ?Sized;

    fn feature_dim(&self) -> usize;

    /// Mean of the reward predictor at `(s, a)`.
    fn reward_mean(&self, s: &Self::State, a: usize) -> f64;

    /// Expected predicted next-state feature at `(s, a)`.
    fn predicted_feature(&self, s: &Self::State, a: usize, out: &mut [f64]);

    /// W1 between the predicted next-state distribution and a point mass.
    fn transport_to_point(&self, s: &Self::State, a: usize, point: &[f64]) -> f64;
}

/// Tabular models plus a feature vector per state.
pub struct TabularWorld<'a> {
    pub reward: &'a GaussianRewardModel,
    pub transitions: &'a EmpiricalTransitionModel,
    pub features: &'a [Vec<f64>],
}

impl<'a> TabularWorld<'a> {
    pub fn new(reward: &'a GaussianRewardModel, transitions: &'a EmpiricalTransitionModel, features: &'a [Vec<f64>]) -> Result<Self> {
        if features.len() != transitions.n_states() {
            return Err(Error::Config(format!(
                "{} feature rows for {} states",
                features.len(),
                transitions.n_states()
            )));
        }
        let dim = features.first().map_or(0, Vec::len);
        if features.iter().any(|f| f.len() != dim) {
            return Err(Error::Input("feature rows have mixed dimensions".into()));
        }
        Ok(Self {
            reward,
            transitions,
            features,
        })
    }
}

impl WorldModel for TabularWorld<'_> {
    type State = usize;

    fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    fn reward_mean(&self, s: &usize, a: usize) -> f64 {
        self.reward.predict(*s, a).0
    }

    fn predicted_feature(&self, s: &usize, a: usize, out: &mut [f64]) {
        out.fill(0.0);
        for (t, p) in self.transitions.query(*s, a).probs.iter().enumerate() {
            if *p > 0.0 {
                for (o, f) in out.iter_mut().zip(&self.features[t]) {
                    *o += p * f;
                }
            }
        }
    }

    fn transport_to_point(&self, s: &usize, a: usize, point: &[f64]) -> f64 {
        let probs = self.transitions.query(*s, a).probs;
        let dist = DiscreteDistribution::from_dense(&probs).expect("model rows are normalized");
        w1_to_point(&dist, self.features, point).expect("feature dimensions checked at construction")
    }
}

fn batch_mean_reward<S>(batch: &[TransitionRecord<S>]) -> f64 {
    batch.iter().map(|r| r.r).sum::<f64>() / batch.len() as f64
}

/// Batch-mean anchor: mean reward and element-wise mean of the predicted
/// next features `P_hat(s_k, a_k)`.
pub fn compute_anchor<S, M>(batch: &[TransitionRecord<S>], model: &M) -> Result<Anchor>
where
    M: WorldModel<State = S>,
{
    if batch.is_empty() {
        return Err(Error::Input("anchor needs a nonempty batch".into()));
    }
    let dim = model.feature_dim();
    let mut z_star = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    for rec in batch {
        model.predicted_feature(&rec.s, rec.a, &mut scratch);
        for (z, x) in z_star.iter_mut().zip(&scratch) {
            *z += x;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    z_star.iter_mut().for_each(|z| *z *= inv);
    Ok(Anchor {
        r_star: batch_mean_reward(batch),
        z_star,
    })
}

/// Anchor under any [`AnchorPolicy`]. `initial_feature` is only read by
/// [`AnchorPolicy::FixedInitialState`].
pub fn compute_anchor_with<S, M, R>(
    policy: AnchorPolicy,
    batch: &[TransitionRecord<S>],
    model: &M,
    initial_feature: &[f64],
    rng: &mut R,
) -> Result<Anchor>
where
    M: WorldModel<State = S>,
    R: Rng + ?Sized,
{
    match policy {
        AnchorPolicy::BatchMean => compute_anchor(batch, model),
        AnchorPolicy::FixedInitialState => {
            if batch.is_empty() {
                return Err(Error::Input("anchor needs a nonempty batch".into()));
            }
            Ok(Anchor {
                r_star: batch_mean_reward(batch),
                z_star: initial_feature.to_vec(),
            })
        }
        AnchorPolicy::RandomBatchElement => {
            if batch.is_empty() {
                return Err(Error::Input("anchor needs a nonempty batch".into()));
            }
            let k = rng.gen_range(0..batch.len());
            compute_anchor(&batch[k..=k], model)
        }
    }
}

/// `c_R |mu(s, a) - r_star| + c_T W1(P_hat(s, a), z_star)`.
pub fn potential<M: WorldModel>(s: &M::State, a: usize, anchor: &Anchor, model: &M, cfg: &ShapingConfig) -> f64 {
    let reward_gap = (model.reward_mean(s, a) - anchor.r_star).abs();
    let transport = if cfg.c_t == 0.0 {
        0.0
    } else {
        model.transport_to_point(s, a, &anchor.z_star)
    };
    cfg.c_r * reward_gap + cfg.c_t * transport
}

/// `E_{a ~ pi}[potential(s, a)]`, a function of the state alone.
pub fn state_only_potential<M: WorldModel>(
    s: &M::State,
    action_probs: &[f64],
    anchor: &Anchor,
    model: &M,
    cfg: &ShapingConfig,
) -> f64 {
    action_probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(a, &p)| p * potential(s, a, anchor, model, cfg))
        .sum()
}

/// `F = gamma * phi_next - phi_t`.
pub fn shaping_bonus(phi_t: f64, phi_next: f64, gamma: f64) -> f64 {
    gamma * phi_next - phi_t
}

/// `r' = r + eta * f`.
pub fn shaped_reward(r: f64, f: f64, eta: f64) -> f64 {
    r + eta * f
}

/// `sum_t gamma^t F_t` for the potentials along one trajectory.
pub fn discounted_bonus_sum(potentials: &[f64], gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut discount = 1.0;
    for w in potentials.windows(2) {
        total += discount * shaping_bonus(w[0], w[1], gamma);
        discount *= gamma;
    }
    total
}

#[derive(Debug, Clone)]
pub struct InvarianceReport {
    /// `max |Q'(s, a) - Q(s, a) + eta phi(s)|`.
    pub max_residual: f64,
    /// States whose greedy actions differ between the two MDPs.
    pub disagreements: Vec<usize>,
    pub q: Array2<f64>,
    pub q_shaped: Array2<f64>,
}

impl InvarianceReport {
    pub fn argmax_agree(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// Ties among greedy actions are resolved this far below the maximum, so
/// solver noise cannot split genuinely tied actions.
pub const ARGMAX_TIE_TOL: f64 = 1e-7;

/// Greedy action set per state: every action within [`ARGMAX_TIE_TOL`] of
/// the row maximum, in index order.
pub fn greedy_sets(q: &Array2<f64>) -> Vec<Vec<usize>> {
    q.rows()
        .into_iter()
        .map(|row| {
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..row.len()).filter(|&a| row[a] >= best - ARGMAX_TIE_TOL).collect()
        })
        .collect()
}

/// Solves `M` and the shaped `M'` with `r'(s, a, s') = r(s, a) + eta (gamma
/// phi(s') - phi(s))` and compares `Q*_{M'}` with `Q*_M - eta phi`.
pub fn verify_policy_invariance(mdp: &TabularMdp, phi: &[f64], eta: f64, tol: f64) -> Result<InvarianceReport> {
    let n = mdp.n_states();
    if phi.len() != n {
        return Err(Error::Input(format!("potential has {} entries for {n} states", phi.len())));
    }
    if phi.iter().any(|p| !p.is_finite()) || !eta.is_finite() {
        return Err(Error::Input("potential and eta must be finite".into()));
    }
    let gamma = mdp.gamma();
    let mut shaped = mdp.reward().clone();
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            let next: f64 = mdp.transition_row(s, a).iter().zip(phi).map(|(p, f)| p * f).sum();
            shaped[[s, a]] += eta * (gamma * next - phi[s]);
        }
    }
    let shaped_mdp = mdp.clone().with_reward(shaped)?;
    let opts = SolveOptions::with_tol(tol);
    let q = value_iteration(mdp, opts)?.q().cloned().expect("value iteration yields Q");
    let q_shaped = value_iteration(&shaped_mdp, opts)?.q().cloned().expect("value iteration yields Q");

    let mut max_residual: f64 = 0.0;
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            max_residual = max_residual.max((q_shaped[[s, a]] - q[[s, a]] + eta * phi[s]).abs());
        }
    }
    let disagreements = greedy_sets(&q)
        .into_iter()
        .zip(greedy_sets(&q_shaped))
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(s, _)| s)
        .collect();
    Ok(InvarianceReport {
        max_residual,
        disagreements,
        q,
        q_shaped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::random_mdp;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two states at features (0, 0) and (2, 4); action 0 stays, action 1 swaps.
    fn world() -> (GaussianRewardModel, EmpiricalTransitionModel, Vec<Vec<f64>>) {
        let reward = GaussianRewardModel::from_cells(
            [((0, 0), (0.0, 0.1)), ((0, 1), (1.0, 0.1)), ((1, 0), (1.0, 0.1)), ((1, 1), (0.5, 0.1))],
            0.0,
            1.0,
        )
        .unwrap();
        let mut tm = EmpiricalTransitionModel::new(2, 0.0).unwrap();
        tm.observe(0, 0, 0);
        tm.observe(0, 1, 1);
        tm.observe(1, 0, 1);
        tm.observe(1, 1, 0);
        (reward, tm, vec![vec![0.0, 0.0], vec![2.0, 4.0]])
    }

    fn rec(s: usize, a: usize, r: f64) -> TransitionRecord {
        TransitionRecord { s, a, r, s_next: 0, done: false }
    }

    #[test]
    fn anchor_examples() {
        let (reward, tm, features) = world();
        let w = TabularWorld::new(&reward, &tm, &features).unwrap();
        let single = compute_anchor(&[rec(0, 1, 0.3)], &w).unwrap();
        assert_eq!(single, Anchor { r_star: 0.3, z_star: vec![2.0, 4.0] });

        let batch = [rec(0, 0, 0.0), rec(0, 1, 0.0), rec(1, 0, 1.0), rec(1, 1, 1.0)];
        let anchor = compute_anchor(&batch, &w).unwrap();
        assert_eq!(anchor.r_star, 0.5);
        assert_eq!(anchor.z_star, vec![1.0, 2.0]);

        let mut reversed = batch.to_vec();
        reversed.reverse();
        assert_eq!(compute_anchor(&reversed, &w).unwrap(), anchor);

        let empty: [TransitionRecord; 0] = [];
        assert!(compute_anchor(&empty, &w).is_err());
    }

    #[test]
    fn anchor_variants() {
        let (reward, tm, features) = world();
        let w = TabularWorld::new(&reward, &tm, &features).unwrap();
        let batch = [rec(0, 0, 0.0), rec(1, 0, 1.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fixed = compute_anchor_with(AnchorPolicy::FixedInitialState, &batch, &w, &[7.0, 7.0], &mut rng).unwrap();
        assert_eq!(fixed, Anchor { r_star: 0.5, z_star: vec![7.0, 7.0] });
        let one = compute_anchor_with(AnchorPolicy::RandomBatchElement, &batch, &w, &[], &mut rng).unwrap();
        assert!(one == compute_anchor(&batch[..1], &w).unwrap() || one == compute_anchor(&batch[1..], &w).unwrap());
    }

    #[test]
    fn potential_examples() {
        let (reward, tm, features) = world();
        let w = TabularWorld::new(&reward, &tm, &features).unwrap();
        let cfg = ShapingConfig::new(1.0, 0.99);
        // (0, 0) predicts reward 0 and stays at the origin.
        let at = Anchor { r_star: 0.0, z_star: vec![0.0, 0.0] };
        assert_eq!(potential(&0, 0, &at, &w, &cfg), 0.0);

        // |mu - r*| = 0.5 and the predicted next state sits 1.0 from z*.
        let off = Anchor { r_star: 0.5, z_star: vec![1.0, 0.0] };
        assert_abs_diff_eq!(potential(&0, 0, &off, &w, &cfg), 0.5 + 0.99 * 1.0, epsilon = 1e-15);

        let reward_only = ShapingConfig { c_t: 0.0, ..cfg };
        assert_eq!(potential(&0, 0, &off, &w, &reward_only), 0.5);
    }

    #[test]
    fn state_only_potential_examples() {
        let (reward, tm, features) = world();
        let w = TabularWorld::new(&reward, &tm, &features).unwrap();
        let cfg = ShapingConfig { c_t: 0.0, ..ShapingConfig::new(1.0, 0.9) };
        let anchor = Anchor { r_star: 0.0, z_star: vec![0.0, 0.0] };
        // Reward-only potentials at state 1 are 1.0 and 0.5.
        assert_eq!(state_only_potential(&1, &[1.0, 0.0], &anchor, &w, &cfg), potential(&1, 0, &anchor, &w, &cfg));
        let uniform = state_only_potential(&1, &[0.5, 0.5], &anchor, &w, &cfg);
        assert_abs_diff_eq!(uniform, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn bonus_examples() {
        assert_abs_diff_eq!(shaping_bonus(1.0, 1.0, 0.99), -0.01, epsilon = 1e-15);
        assert_eq!(shaping_bonus(0.0, 2.0, 0.5), 1.0);
        assert_eq!(shaping_bonus(3.0, 3.0, 1.0), 0.0);
        assert_eq!(shaped_reward(0.4, 123.0, 0.0), 0.4);
        assert_abs_diff_eq!(shaped_reward(0.0, -0.01, 1.0), -0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(shaped_reward(0.0, -0.01, 10.0), -0.1, epsilon = 1e-15);
    }

    #[test]
    fn telescoping() {
        let phis = [0.3, 1.2, 0.7, 2.5, 0.1];
        let gamma: f64 = 0.9;
        let t = phis.len() - 1;
        let want = gamma.powi(t as i32) * phis[t] - phis[0];
        assert_abs_diff_eq!(discounted_bonus_sum(&phis, gamma), want, epsilon = 1e-14);
    }

    #[test]
    fn invariance_trivial_potentials() {
        let mdp = random_mdp(4, 5, 3, 0.2).unwrap();
        let tol = 1e-10;
        let zero = verify_policy_invariance(&mdp, &[0.0; 5], 1.0, tol).unwrap();
        assert!(zero.max_residual <= 2.0 * tol);
        assert!(zero.argmax_agree());
        let constant = verify_policy_invariance(&mdp, &[2.5; 5], 1.0, tol).unwrap();
        assert!(constant.max_residual <= 2.0 * tol, "{}", constant.max_residual);
        assert!(constant.argmax_agree());
    }

    #[test]
    fn invariance_seeded() {
        let mdp = random_mdp(6, 6, 3, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let phi: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..3.0)).collect();
        let report = verify_policy_invariance(&mdp, &phi, 1.0, 1e-10).unwrap();
        assert!(report.max_residual <= 1e-6);
        assert!(report.argmax_agree());
        assert!(verify_policy_invariance(&mdp, &phi[..3], 1.0, 1e-10).is_err());
    }
}
