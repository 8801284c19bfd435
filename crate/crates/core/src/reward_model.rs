//! Gaussian reward predictor and empirical transition models fitted from
//! replay data.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

pub const SIGMA_MIN: f64 = 1e-4;
pub const SIGMA_MAX: f64 = 1.0;

/// One replay element. `S` is a state id for tabular problems or a feature
/// vector for continuous ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRecord<S = usize> {
    pub s: S,
    pub a: usize,
    pub r: f64,
    pub s_next: S,
    pub done: bool,
}

/// n-step Monte Carlo return `sum_{k<n} gamma^k r_{t+k}` over a contiguous
/// trajectory slice, cut after the first terminal record or at the end of
/// the slice.
pub fn mc_target<S>(records: &[TransitionRecord<S>], t: usize, n_step: usize, gamma: f64) -> Result<f64> {
    if n_step == 0 {
        return Err(Error::Config("n_step must be at least 1".into()));
    }
    if t >= records.len() {
        return Err(Error::Input(format!("index {t} out of range for {} records", records.len())));
    }
    let mut total = 0.0;
    let mut discount = 1.0;
    for rec in records[t..].iter().take(n_step) {
        total += discount * rec.r;
        discount *= gamma;
        if rec.done {
            break;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardCell {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Per-(state, action) Gaussian `N(mean, std^2)` with `std` hard-clipped to
/// `[sigma_min, sigma_max]`. Cells without data answer with the prior.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianRewardModel {
    cells: BTreeMap<(usize, usize), RewardCell>,
    sigma_min: f64,
    sigma_max: f64,
    prior_mean: f64,
    prior_std: f64,
}

fn check_bounds(sigma_min: f64, sigma_max: f64) -> Result<()> {
    if !(sigma_min >= 0.0 && sigma_min <= sigma_max && sigma_max.is_finite()) {
        return Err(Error::Config(format!(
            "need 0 <= sigma_min <= sigma_max, got [{sigma_min}, {sigma_max}]"
        )));
    }
    Ok(())
}

impl GaussianRewardModel {
    /// Model with explicit cells. Unlike [`fit_reward_model`] this accepts
    /// `sigma_min = 0`, which is how degenerate (noise-free) predictors are
    /// expressed.
    pub fn from_cells(
        cells: impl IntoIterator<Item = ((usize, usize), (f64, f64))>,
        sigma_min: f64,
        sigma_max: f64,
    ) -> Result<Self> {
        check_bounds(sigma_min, sigma_max)?;
        let mut out = Self::empty(sigma_min, sigma_max);
        for (key, (mean, std)) in cells {
            if !mean.is_finite() || !std.is_finite() {
                return Err(Error::Input(format!("cell {key:?} has non-finite parameters")));
            }
            out.cells.insert(
                key,
                RewardCell {
                    mean,
                    std: std.clamp(sigma_min, sigma_max),
                    count: 0,
                },
            );
        }
        Ok(out)
    }

    /// Every cell of `mdp` with mean `r(s, a)` and the given std (clamped).
    pub fn unbiased_for(mdp: &TabularMdp, std: impl Fn(usize, usize) -> f64, sigma_min: f64, sigma_max: f64) -> Result<Self> {
        let cells = (0..mdp.n_states())
            .flat_map(|s| (0..mdp.n_actions()).map(move |a| (s, a)))
            .map(|(s, a)| ((s, a), (mdp.reward()[[s, a]], std(s, a))));
        Self::from_cells(cells.collect::<Vec<_>>(), sigma_min, sigma_max)
    }

    fn empty(sigma_min: f64, sigma_max: f64) -> Self {
        Self {
            cells: BTreeMap::new(),
            sigma_min,
            sigma_max,
            prior_mean: 0.0,
            prior_std: sigma_max,
        }
    }

    pub fn with_prior(mut self, mean: f64, std: f64) -> Self {
        self.prior_mean = mean;
        self.prior_std = std.clamp(self.sigma_min, self.sigma_max);
        self
    }

    pub fn sigma_bounds(&self) -> (f64, f64) {
        (self.sigma_min, self.sigma_max)
    }

    pub fn prior(&self) -> (f64, f64) {
        (self.prior_mean, self.prior_std)
    }

    pub fn has_cell(&self, s: usize, a: usize) -> bool {
        self.cells.contains_key(&(s, a))
    }

    pub fn cell(&self, s: usize, a: usize) -> Option<&RewardCell> {
        self.cells.get(&(s, a))
    }

    pub fn cells(&self) -> impl Iterator<Item = (&(usize, usize), &RewardCell)> {
        self.cells.iter()
    }

    /// `(mean, std)` for a seen cell, the prior otherwise.
    pub fn predict(&self, s: usize, a: usize) -> (f64, f64) {
        match self.cells.get(&(s, a)) {
            Some(c) => (c.mean, c.std),
            None => (self.prior_mean, self.prior_std),
        }
    }

    /// Reparameterized draw `mean + std * xi`, `xi ~ N(0, 1)`.
    pub fn sample_reward<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> f64 {
        let (mu, sigma) = self.predict(s, a);
        let xi: f64 = rng.sample(StandardNormal);
        mu + sigma * xi
    }

    /// Empirical negative log-likelihood (up to the constant `log sqrt(2 pi)`)
    /// of `targets` under `N(mean, std^2)`.
    pub fn nll(targets: &[f64], mean: f64, std: f64) -> f64 {
        let var = std * std;
        let n = targets.len() as f64;
        targets
            .iter()
            .map(|t| (t - mean) * (t - mean) / (2.0 * var) + 0.5 * var.ln())
            .sum::<f64>()
            / n
    }

    /// One line per cell: `s a mean std count`.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "# sigma_min {} sigma_max {} prior_mean {} prior_std {}\ns a mean std count\n",
            self.sigma_min, self.sigma_max, self.prior_mean, self.prior_std
        );
        for ((s, a), c) in &self.cells {
            let _ = writeln!(out, "{s} {a} {} {} {}", c.mean, c.std, c.count);
        }
        out
    }
}

/// Maximum-likelihood Gaussian from running sums, std clipped to the bounds.
pub fn mle_from_sums(count: f64, sum: f64, sum_sq: f64, sigma_min: f64, sigma_max: f64) -> (f64, f64) {
    let mean = sum / count;
    let var = (sum_sq / count - mean * mean).max(0.0);
    (mean, var.sqrt().clamp(sigma_min, sigma_max))
}

/// Per-cell Gaussian MLE: sample mean and population std, clipped. This is
/// the exact minimizer of the Gaussian NLL over per-cell constants.
pub fn fit_reward_model(dataset: &[(usize, usize, f64)], sigma_min: f64, sigma_max: f64) -> Result<GaussianRewardModel> {
    if !(sigma_min > 0.0) {
        return Err(Error::Config(format!("sigma_min must be positive, got {sigma_min}")));
    }
    check_bounds(sigma_min, sigma_max)?;
    let mut grouped: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for &(s, a, target) in dataset {
        if !target.is_finite() {
            return Err(Error::Input(format!("non-finite target for cell ({s}, {a})")));
        }
        grouped.entry((s, a)).or_default().push(target);
    }
    let mut model = GaussianRewardModel::empty(sigma_min, sigma_max);
    for (key, targets) in grouped {
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
        model.cells.insert(
            key,
            RewardCell {
                mean,
                std: var.sqrt().clamp(sigma_min, sigma_max),
                count: targets.len(),
            },
        );
    }
    Ok(model)
}

/// A next-state distribution plus whether it came from data.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionQuery {
    pub probs: Vec<f64>,
    pub confident: bool,
}

/// Tabular `P_hat(s' | s, a)` from (possibly fractional) visit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTransitionModel {
    n_states: usize,
    counts: BTreeMap<(usize, usize), BTreeMap<usize, f64>>,
    smoothing: f64,
}

impl EmpiricalTransitionModel {
    pub fn new(n_states: usize, smoothing: f64) -> Result<Self> {
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(Error::Config(format!("smoothing must be nonnegative, got {smoothing}")));
        }
        Ok(Self {
            n_states,
            counts: BTreeMap::new(),
            smoothing,
        })
    }

    /// Counts equal to the true probabilities, i.e. the infinite-data limit.
    pub fn from_mdp_exact(mdp: &TabularMdp) -> Self {
        let mut model = Self {
            n_states: mdp.n_states(),
            counts: BTreeMap::new(),
            smoothing: 0.0,
        };
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                let row = mdp
                    .transition_row(s, a)
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(t, &p)| (t, p))
                    .collect();
                model.counts.insert((s, a), row);
            }
        }
        model
    }

    pub fn observe(&mut self, s: usize, a: usize, s_next: usize) {
        *self.counts.entry((s, a)).or_default().entry(s_next).or_insert(0.0) += 1.0;
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn has_cell(&self, s: usize, a: usize) -> bool {
        self.counts.contains_key(&(s, a))
    }

    pub fn count(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.counts
            .get(&(s, a))
            .and_then(|row| row.get(&s_next))
            .copied()
            .unwrap_or(0.0)
    }

    /// Normalized (smoothed) counts; unseen cells fall back to a self-loop.
    pub fn query(&self, s: usize, a: usize) -> TransitionQuery {
        let mut probs = vec![0.0; self.n_states];
        match self.counts.get(&(s, a)) {
            Some(row) => {
                let total: f64 = row.values().sum::<f64>() + self.smoothing * self.n_states as f64;
                for p in probs.iter_mut() {
                    *p = self.smoothing / total;
                }
                for (&t, &c) in row {
                    probs[t] += c / total;
                }
                crate::mdp::normalize_in_place(&mut probs);
                TransitionQuery { probs, confident: true }
            }
            None => {
                probs[s] = 1.0;
                TransitionQuery { probs, confident: false }
            }
        }
    }
}

pub fn fit_transition_model(n_states: usize, dataset: &[TransitionRecord], smoothing: f64) -> Result<EmpiricalTransitionModel> {
    let mut model = EmpiricalTransitionModel::new(n_states, smoothing)?;
    for rec in dataset {
        if rec.s >= n_states || rec.s_next >= n_states {
            return Err(Error::Input(format!(
                "record ({}, {}, {}) outside {n_states} states",
                rec.s, rec.a, rec.s_next
            )));
        }
        model.observe(rec.s, rec.a, rec.s_next);
    }
    Ok(model)
}

/// Continuous-state transition model: the running mean of observed next
/// features per discretized `(cell, action)`. Supports removal so it can
/// track a FIFO replay buffer exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTransitionModel {
    n_cells: usize,
    n_actions: usize,
    dim: usize,
    counts: Vec<u32>,
    sums: Vec<f64>,
}

impl FeatureTransitionModel {
    pub fn new(n_cells: usize, n_actions: usize, dim: usize) -> Self {
        Self {
            n_cells,
            n_actions,
            dim,
            counts: vec![0; n_cells * n_actions],
            sums: vec![0.0; n_cells * n_actions * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn slot(&self, cell: usize, a: usize) -> usize {
        debug_assert!(cell < self.n_cells && a < self.n_actions);
        cell * self.n_actions + a
    }

    pub fn observe(&mut self, cell: usize, a: usize, next: &[f64]) {
        let k = self.slot(cell, a);
        self.counts[k] += 1;
        for (acc, x) in self.sums[k * self.dim..(k + 1) * self.dim].iter_mut().zip(next) {
            *acc += x;
        }
    }

    pub fn forget(&mut self, cell: usize, a: usize, next: &[f64]) {
        let k = self.slot(cell, a);
        debug_assert!(self.counts[k] > 0);
        self.counts[k] -= 1;
        let range = k * self.dim..(k + 1) * self.dim;
        if self.counts[k] == 0 {
            self.sums[range].fill(0.0);
        } else {
            for (acc, x) in self.sums[range].iter_mut().zip(next) {
                *acc -= x;
            }
        }
    }

    pub fn count(&self, cell: usize, a: usize) -> u32 {
        self.counts[self.slot(cell, a)]
    }

    /// Mean next feature, or `own` (an identity prediction) with
    /// `confident = false` when the cell is unseen.
    pub fn predict_into(&self, cell: usize, a: usize, own: &[f64], out: &mut [f64]) -> bool {
        let k = self.slot(cell, a);
        let n = self.counts[k];
        if n == 0 {
            out.copy_from_slice(own);
            return false;
        }
        let inv = 1.0 / n as f64;
        for (o, s) in out.iter_mut().zip(&self.sums[k * self.dim..(k + 1) * self.dim]) {
            *o = s * inv;
        }
        true
    }

    pub fn predict(&self, cell: usize, a: usize, own: &[f64]) -> (Vec<f64>, bool) {
        let mut out = vec![0.0; self.dim];
        let confident = self.predict_into(cell, a, own, &mut out);
        (out, confident)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rec(r: f64, done: bool) -> TransitionRecord {
        TransitionRecord { s: 0, a: 0, r, s_next: 0, done }
    }

    #[test]
    fn mc_target_examples() {
        let traj = [rec(0.3, false), rec(0.7, false)];
        assert_eq!(mc_target(&traj, 0, 1, 0.99).unwrap(), 0.3);
        let traj = [rec(0.0, false), rec(0.0, false), rec(1.0, false)];
        assert_abs_diff_eq!(mc_target(&traj, 0, 3, 0.99).unwrap(), 0.9801, epsilon = 1e-15);
        let traj = [rec(0.5, true), rec(9.0, false)];
        assert_eq!(mc_target(&traj, 0, 3, 0.99).unwrap(), 0.5);
        assert!(mc_target(&traj, 2, 1, 0.99).is_err());
        assert!(mc_target(&traj, 0, 0, 0.99).is_err());
    }

    #[test]
    fn fit_examples() {
        let data = [(0, 0, 0.0), (0, 0, 0.0), (0, 0, 0.0), (1, 0, 1.0), (1, 0, 3.0), (2, 1, 0.7)];
        let model = fit_reward_model(&data, SIGMA_MIN, SIGMA_MAX).unwrap();
        assert_eq!(model.predict(0, 0), (0.0, 1e-4));
        assert_eq!(model.predict(1, 0), (2.0, 1.0));
        assert_eq!(model.predict(2, 1), (0.7, SIGMA_MIN));
        assert_eq!(model.cell(1, 0).unwrap().count, 2);
        // unseen cell -> prior (0, sigma_max)
        assert_eq!(model.predict(5, 5), (0.0, SIGMA_MAX));
        let custom = model.clone().with_prior(0.0, 1.0);
        assert_eq!(custom.predict(9, 0), (0.0, 1.0));
    }

    #[test]
    fn fit_rejects_bad_bounds() {
        assert!(fit_reward_model(&[], 0.0, 1.0).is_err());
        assert!(fit_reward_model(&[], 2.0, 1.0).is_err());
        assert!(fit_reward_model(&[(0, 0, f64::NAN)], 0.1, 1.0).is_err());
    }

    #[test]
    fn std_stays_within_bounds() {
        let data: Vec<_> = (0..50).map(|k| (k % 5, 0, (k as f64).powi(2))).collect();
        let model = fit_reward_model(&data, 0.01, 0.5).unwrap();
        for s in 0..10 {
            let (_, sd) = model.predict(s, 0);
            assert!((0.01..=0.5).contains(&sd));
        }
    }

    #[test]
    fn sampling_is_reproducible_and_exact_at_zero_std() {
        let model = GaussianRewardModel::from_cells([((0, 0), (0.25, 0.0))], 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(model.sample_reward(0, 0, &mut rng), 0.25);

        let model = GaussianRewardModel::from_cells([((0, 0), (0.0, 1.0))], 0.0, 1.0).unwrap();
        let a: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            (0..5).map(|_| model.sample_reward(0, 0, &mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            (0..5).map(|_| model.sample_reward(0, 0, &mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn transition_examples() {
        let data: Vec<TransitionRecord> = [1, 1, 1, 2]
            .into_iter()
            .map(|t| TransitionRecord { s: 0, a: 0, r: 0.0, s_next: t, done: false })
            .collect();
        let model = fit_transition_model(3, &data, 0.0).unwrap();
        let q = model.query(0, 0);
        assert_eq!(q.probs, vec![0.0, 0.75, 0.25]);
        assert!(q.confident);

        let det = fit_transition_model(3, &data[..2], 0.0).unwrap();
        assert_eq!(det.query(0, 0).probs, vec![0.0, 1.0, 0.0]);

        let unseen = model.query(2, 1);
        assert_eq!(unseen.probs, vec![0.0, 0.0, 1.0]);
        assert!(!unseen.confident);
    }

    #[test]
    fn smoothing_spreads_mass() {
        let mut model = EmpiricalTransitionModel::new(2, 1.0).unwrap();
        model.observe(0, 0, 1);
        assert_eq!(model.query(0, 0).probs, vec![1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn exact_counts_reproduce_the_mdp() {
        let mdp = crate::mdp::random_mdp(4, 5, 2, 0.0).unwrap();
        let model = EmpiricalTransitionModel::from_mdp_exact(&mdp);
        for s in 0..5 {
            for a in 0..2 {
                let q = model.query(s, a);
                for t in 0..5 {
                    assert_abs_diff_eq!(q.probs[t], mdp.transition()[[s, a, t]], epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn feature_model_tracks_additions_and_removals() {
        let mut model = FeatureTransitionModel::new(4, 2, 2);
        assert_eq!(model.predict(1, 0, &[0.3, 0.4]), (vec![0.3, 0.4], false));
        model.observe(1, 0, &[1.0, 0.0]);
        model.observe(1, 0, &[3.0, 2.0]);
        assert_eq!(model.predict(1, 0, &[0.0, 0.0]), (vec![2.0, 1.0], true));
        model.forget(1, 0, &[1.0, 0.0]);
        assert_eq!(model.predict(1, 0, &[0.0, 0.0]), (vec![3.0, 2.0], true));
        model.forget(1, 0, &[3.0, 2.0]);
        assert_eq!(model.count(1, 0), 0);
    }

    #[test]
    fn mle_from_sums_matches_two_pass() {
        let xs = [1.0, 3.0, 2.5, -0.5];
        let (mu, sd) = mle_from_sums(4.0, xs.iter().sum(), xs.iter().map(|x| x * x).sum(), 0.0, 10.0);
        let model = fit_reward_model(&xs.map(|x| (0, 0, x)), 1e-9, 10.0).unwrap();
        let (m2, s2) = model.predict(0, 0);
        assert_abs_diff_eq!(mu, m2, epsilon = 1e-14);
        assert_abs_diff_eq!(sd, s2, epsilon = 1e-12);
    }
}
