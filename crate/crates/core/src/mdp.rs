//! Finite MDPs, policies and the exact/iterative solvers every other module
//! is checked against.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Array3, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Row sums must match 1 to this precision.
pub const PROB_TOL: f64 = 1e-12;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    /// `transition[[s, a, s']] = P(s' | s, a)`.
    transition: Array3<f64>,
    /// `reward[[s, a]] = r(s, a)`.
    reward: Array2<f64>,
    gamma: f64,
}

fn check_distribution(row: impl IntoIterator<Item = f64>, what: &str) -> Result<()> {
    let mut sum = 0.0;
    for p in row {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::Input(format!("{what}: entry {p} is not a probability")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::Input(format!("{what}: sums to {sum}, expected 1")));
    }
    Ok(())
}

impl TabularMdp {
    pub fn new(transition: Array3<f64>, reward: Array2<f64>, gamma: f64) -> Result<Self> {
        let (n, m, n2) = transition.dim();
        if n == 0 || m == 0 {
            return Err(Error::Config("an MDP needs at least one state and one action".into()));
        }
        if n2 != n || reward.dim() != (n, m) {
            return Err(Error::Config(format!(
                "transition is {n}x{m}x{n2} but reward is {:?}",
                reward.dim()
            )));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        for s in 0..n {
            for a in 0..m {
                check_distribution(
                    transition.slice(ndarray::s![s, a, ..]).iter().copied(),
                    &format!("P(.|{s},{a})"),
                )?;
            }
        }
        if let Some(r) = reward.iter().find(|r| !r.is_finite()) {
            return Err(Error::Input(format!("non-finite reward {r}")));
        }
        Ok(Self {
            transition,
            reward,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.reward.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.reward.ncols()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn transition(&self) -> &Array3<f64> {
        &self.transition
    }

    pub fn reward(&self) -> &Array2<f64> {
        &self.reward
    }

    pub fn transition_row(&self, s: usize, a: usize) -> ndarray::ArrayView1<'_, f64> {
        self.transition.slice(ndarray::s![s, a, ..])
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        Self::new(self.transition, self.reward, gamma)
    }

    pub fn with_reward(self, reward: Array2<f64>) -> Result<Self> {
        Self::new(self.transition, reward, self.gamma)
    }

    /// Plain-text fixture format: a header of `states`, `actions` and `gamma`
    /// lines followed by a `transition` block (one row per `(s, a)` in
    /// row-major order) and a `reward` block (one row per state).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let (n, m) = (self.n_states(), self.n_actions());
        let _ = writeln!(out, "states {n}");
        let _ = writeln!(out, "actions {m}");
        let _ = writeln!(out, "gamma {}", self.gamma);
        out.push_str("transition\n");
        for s in 0..n {
            for a in 0..m {
                let row: Vec<String> = self.transition_row(s, a).iter().map(|p| p.to_string()).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out.push_str("reward\n");
        for s in 0..n {
            let row: Vec<String> = self.reward.row(s).iter().map(|r| r.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cur = LineCursor::new(text);
        let n: usize = cur.header("states")?;
        let m: usize = cur.header("actions")?;
        let gamma: f64 = cur.header("gamma")?;
        cur.keyword("transition")?;
        let mut transition = Array3::zeros((n, m, n));
        for s in 0..n {
            for a in 0..m {
                let row = cur.numbers(n)?;
                transition
                    .slice_mut(ndarray::s![s, a, ..])
                    .assign(&Array1::from(row));
            }
        }
        cur.keyword("reward")?;
        let mut reward = Array2::zeros((n, m));
        for s in 0..n {
            reward.row_mut(s).assign(&Array1::from(cur.numbers(m)?));
        }
        if !cur.is_done() {
            return Err(cur.trailing());
        }
        Self::new(transition, reward, gamma)
    }
}

/// Non-empty, comment-stripped lines with their 1-based line numbers.
pub(crate) struct LineCursor<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> LineCursor<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Self { lines, pos: 0 }
    }

    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let line = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::parse(self.lines.last().map_or(0, |l| l.0), 1, format!("unexpected end of input, expected {what}")))?;
        self.pos += 1;
        Ok(line)
    }

    pub(crate) fn header<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (no, line) = self.next_line(key)?;
        let mut parts = line.splitn(2, char::is_whitespace);
        if parts.next() != Some(key) {
            return Err(Error::parse(no, 1, format!("expected `{key}`")));
        }
        let value = parts.next().unwrap_or("").trim();
        value
            .parse()
            .map_err(|_| Error::parse(no, key.len() + 2, format!("bad value `{value}` for `{key}`")))
    }

    pub(crate) fn keyword(&mut self, key: &str) -> Result<()> {
        let (no, line) = self.next_line(key)?;
        if line != key {
            return Err(Error::parse(no, 1, format!("expected `{key}`")));
        }
        Ok(())
    }

    pub(crate) fn numbers(&mut self, width: usize) -> Result<Vec<f64>> {
        let (no, line) = self.next_line("a row of numbers")?;
        let row: Vec<f64> = line
            .split_whitespace()
            .enumerate()
            .map(|(col, tok)| {
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(no, col + 1, format!("bad number `{tok}`")))
            })
            .collect::<Result<_>>()?;
        if row.len() != width {
            return Err(Error::parse(no, 1, format!("expected {width} values, found {}", row.len())));
        }
        Ok(row)
    }

    pub(crate) fn is_done(&self) -> bool {
        self.pos >= self.lines.len()
    }

    pub(crate) fn trailing(&self) -> Error {
        let no = self.lines.get(self.pos).map_or(0, |l| l.0);
        Error::parse(no, 1, "unexpected trailing content")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    /// `probs[[s, a]] = pi(a | s)`.
    probs: Array2<f64>,
}

impl Policy {
    pub fn new(probs: Array2<f64>) -> Result<Self> {
        for (s, row) in probs.axis_iter(Axis(0)).enumerate() {
            check_distribution(row.iter().copied(), &format!("pi(.|{s})"))?;
        }
        Ok(Self { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            probs: Array2::from_elem((n_states, n_actions), 1.0 / n_actions as f64),
        }
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let mut probs = Array2::zeros((actions.len(), n_actions));
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::Config(format!("action {a} out of range for state {s}")));
            }
            probs[[s, a]] = 1.0;
        }
        Ok(Self { probs })
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[[s, a]]
    }

    pub fn probs(&self) -> &Array2<f64> {
        &self.probs
    }

    fn check_against(&self, mdp: &TabularMdp) -> Result<()> {
        if self.probs.dim() != (mdp.n_states(), mdp.n_actions()) {
            return Err(Error::Config(format!(
                "policy is {:?} but the MDP has {} states and {} actions",
                self.probs.dim(),
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

/// State values or action values, tagged.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueTable {
    State(Array1<f64>),
    Action(Array2<f64>),
}

impl ValueTable {
    pub fn v(&self) -> Option<&Array1<f64>> {
        match self {
            ValueTable::State(v) => Some(v),
            ValueTable::Action(_) => None,
        }
    }

    pub fn q(&self) -> Option<&Array2<f64>> {
        match self {
            ValueTable::Action(q) => Some(q),
            ValueTable::State(_) => None,
        }
    }

    /// Greedy action per state for a Q table, lowest index on ties.
    pub fn greedy_actions(&self) -> Option<Vec<usize>> {
        self.q().map(|q| q.axis_iter(Axis(0)).map(|row| argmax(row.iter().copied())).collect())
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// `r^pi_s = sum_a pi(a|s) r(s, a)`.
pub fn policy_reward(mdp: &TabularMdp, pi: &Policy) -> Result<Array1<f64>> {
    pi.check_against(mdp)?;
    Ok((pi.probs() * mdp.reward()).sum_axis(Axis(1)))
}

/// `P^pi(.|s) = sum_a pi(a|s) P(.|s, a)`.
pub fn policy_transition(mdp: &TabularMdp, pi: &Policy) -> Result<Array2<f64>> {
    pi.check_against(mdp)?;
    let n = mdp.n_states();
    let mut out = Array2::zeros((n, n));
    for s in 0..n {
        let mut row = out.row_mut(s);
        for a in 0..mdp.n_actions() {
            let p = pi.prob(s, a);
            if p != 0.0 {
                row.scaled_add(p, &mdp.transition_row(s, a));
            }
        }
    }
    Ok(out)
}

fn sup_diff<'a>(a: impl IntoIterator<Item = &'a f64>, b: impl IntoIterator<Item = &'a f64>) -> f64 {
    a.into_iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Iterative policy evaluation. Stops once the a-posteriori error bound
/// `gamma / (1 - gamma) * |V_{k+1} - V_k|_inf` drops below `opts.tol`, so the
/// returned values are within `tol` of the true fixed point.
pub fn policy_evaluation(mdp: &TabularMdp, pi: &Policy, opts: SolveOptions) -> Result<ValueTable> {
    opts.validate()?;
    let r = policy_reward(mdp, pi)?;
    let p = policy_transition(mdp, pi)?;
    let gamma = mdp.gamma();
    let scale = if gamma > 0.0 { gamma / (1.0 - gamma) } else { 0.0 };
    let mut v = Array1::zeros(mdp.n_states());
    let mut delta = f64::INFINITY;
    for _ in 0..opts.max_iters {
        let next = &r + &(p.dot(&v) * gamma);
        delta = sup_diff(&next, &v);
        v = next;
        if scale * delta <= opts.tol {
            return Ok(ValueTable::State(v));
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iters,
        residual: delta,
    })
}

/// Exact policy evaluation via an LU solve of `(I - gamma P^pi) V = r^pi`.
/// Independent of the iterative path; used as an oracle.
pub fn policy_evaluation_direct(mdp: &TabularMdp, pi: &Policy) -> Result<Array1<f64>> {
    let r = policy_reward(mdp, pi)?;
    let p = policy_transition(mdp, pi)?;
    let n = mdp.n_states();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - mdp.gamma() * p[[i, j]]
    });
    let b = DVector::from_iterator(n, r.iter().copied());
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Input("singular Bellman system".into()))?;
    Ok(Array1::from_iter(x.iter().copied()))
}

/// One Bellman optimality backup `r + gamma P max_a Q`.
pub fn bellman_optimality_backup(mdp: &TabularMdp, q: &Array2<f64>) -> Array2<f64> {
    let v: Array1<f64> = q
        .axis_iter(Axis(0))
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let mut out = mdp.reward().clone();
    for s in 0..n {
        for a in 0..m {
            out[[s, a]] += mdp.gamma() * mdp.transition_row(s, a).dot(&v);
        }
    }
    out
}

/// Q-value iteration with the same a-posteriori stopping rule as
/// [`policy_evaluation`].
pub fn value_iteration(mdp: &TabularMdp, opts: SolveOptions) -> Result<ValueTable> {
    opts.validate()?;
    let gamma = mdp.gamma();
    let scale = if gamma > 0.0 { gamma / (1.0 - gamma) } else { 0.0 };
    let mut q = Array2::zeros((mdp.n_states(), mdp.n_actions()));
    let mut delta = f64::INFINITY;
    for _ in 0..opts.max_iters {
        let next = bellman_optimality_backup(mdp, &q);
        delta = sup_diff(&next, &q);
        q = next;
        if scale * delta <= opts.tol {
            return Ok(ValueTable::Action(q));
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iters,
        residual: delta,
    })
}

pub const RANDOM_MDP_GAMMA: f64 = 0.9;

/// Seeded random MDP. Rewards are uniform on `[0, 1]` except for exactly
/// `ceil(n * m * reward_sparsity)` cells, which are zero. Transition rows have
/// random sparsity so the Wasserstein terms are non-trivial. Discount is
/// [`RANDOM_MDP_GAMMA`]; use [`TabularMdp::with_gamma`] to change it.
pub fn random_mdp(seed: u64, n_states: usize, n_actions: usize, reward_sparsity: f64) -> Result<TabularMdp> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::Config("n_states and n_actions must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&reward_sparsity) {
        return Err(Error::Config(format!("reward_sparsity must lie in [0, 1], got {reward_sparsity}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = Array3::zeros((n_states, n_actions, n_states));
    for s in 0..n_states {
        for a in 0..n_actions {
            let mut row: Vec<f64> = (0..n_states)
                .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() })
                .collect();
            if row.iter().all(|&p| p == 0.0) {
                row[rng.gen_range(0..n_states)] = 1.0;
            }
            normalize_in_place(&mut row);
            transition
                .slice_mut(ndarray::s![s, a, ..])
                .assign(&Array1::from(row));
        }
    }
    let cells = n_states * n_actions;
    let zeros = (cells as f64 * reward_sparsity).ceil() as usize;
    let mut reward = Array2::from_shape_fn((n_states, n_actions), |_| rng.gen::<f64>());
    for idx in sample(&mut rng, cells, zeros.min(cells)).into_iter() {
        reward[[idx / n_actions, idx % n_actions]] = 0.0;
    }
    TabularMdp::new(transition, reward, RANDOM_MDP_GAMMA)
}

/// Scale to unit sum, then push the rounding residue into the largest entry
/// so the row sums to 1 to within one ulp.
pub(crate) fn normalize_in_place(row: &mut [f64]) {
    let total: f64 = row.iter().sum();
    for p in row.iter_mut() {
        *p /= total;
    }
    let residue = 1.0 - row.iter().sum::<f64>();
    let big = argmax(row.iter().copied());
    row[big] += residue;
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn self_loop(reward: f64, gamma: f64) -> TabularMdp {
        TabularMdp::new(Array3::ones((1, 1, 1)), array![[reward]], gamma).unwrap()
    }

    #[test]
    fn rejects_bad_rows_and_gamma() {
        let bad = Array3::from_elem((1, 1, 1), 0.5);
        assert!(TabularMdp::new(bad, array![[0.0]], 0.5).is_err());
        assert!(TabularMdp::new(Array3::ones((1, 1, 1)), array![[0.0]], 1.0).is_err());
        assert!(TabularMdp::new(Array3::ones((1, 1, 1)), array![[f64::NAN]], 0.5).is_err());
    }

    #[test]
    fn policy_reward_examples() {
        let mdp = random_mdp(3, 4, 2, 0.0).unwrap().with_reward(Array2::ones((4, 2))).unwrap();
        let pi = Policy::deterministic(&[0, 0, 0, 0], 2).unwrap();
        assert_eq!(policy_reward(&mdp, &pi).unwrap(), Array1::<f64>::ones(4));

        let two = TabularMdp::new(Array3::from_elem((1, 2, 1), 1.0), array![[0.0, 1.0]], 0.5).unwrap();
        let r = policy_reward(&two, &Policy::uniform(1, 2)).unwrap();
        assert_eq!(r[0], 0.5);
    }

    #[test]
    fn policy_reward_matches_loop() {
        let mdp = random_mdp(11, 3, 3, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut probs = Array2::from_shape_fn((3, 3), |_| rng.gen::<f64>());
        for mut row in probs.rows_mut() {
            let mut v = row.to_vec();
            normalize_in_place(&mut v);
            row.assign(&Array1::from(v));
        }
        let pi = Policy::new(probs).unwrap();
        let got = policy_reward(&mdp, &pi).unwrap();
        for s in 0..3 {
            let mut want = 0.0;
            for a in 0..3 {
                want += pi.prob(s, a) * mdp.reward()[[s, a]];
            }
            assert_abs_diff_eq!(got[s], want, epsilon = 1e-15);
        }
    }

    #[test]
    fn policy_transition_examples() {
        let mdp = random_mdp(4, 5, 3, 0.0).unwrap();
        let pi = Policy::deterministic(&[2, 1, 0, 2, 1], 3).unwrap();
        let p = policy_transition(&mdp, &pi).unwrap();
        for (s, a) in [2, 1, 0, 2, 1].into_iter().enumerate() {
            assert_eq!(p.row(s), mdp.transition_row(s, a));
        }

        let mut t = Array3::zeros((2, 2, 2));
        t[[0, 0, 0]] = 1.0;
        t[[0, 1, 1]] = 1.0;
        t[[1, 0, 1]] = 1.0;
        t[[1, 1, 1]] = 1.0;
        let mdp = TabularMdp::new(t, Array2::zeros((2, 2)), 0.5).unwrap();
        let p = policy_transition(&mdp, &Policy::uniform(2, 2)).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn policy_transition_matches_mixture_and_sums_to_one() {
        let mdp = random_mdp(9, 6, 3, 0.0).unwrap();
        let pi = Policy::uniform(6, 3);
        let p = policy_transition(&mdp, &pi).unwrap();
        for s in 0..6 {
            for t in 0..6 {
                let want: f64 = (0..3).map(|a| mdp.transition()[[s, a, t]] / 3.0).sum();
                assert_abs_diff_eq!(p[[s, t]], want, epsilon = 1e-14);
            }
            assert!((p.row(s).sum() - 1.0).abs() <= PROB_TOL);
        }
    }

    #[test]
    fn policy_evaluation_examples() {
        let v = policy_evaluation(&self_loop(1.0, 0.5), &Policy::uniform(1, 1), SolveOptions::default()).unwrap();
        assert_abs_diff_eq!(v.v().unwrap()[0], 2.0, epsilon = 1e-10);

        let mdp = random_mdp(2, 4, 2, 1.0).unwrap();
        let v = policy_evaluation(&mdp, &Policy::uniform(4, 2), SolveOptions::default()).unwrap();
        assert!(v.v().unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn policy_evaluation_matches_direct_solve() {
        let mdp = random_mdp(17, 5, 3, 0.3).unwrap();
        let pi = Policy::uniform(5, 3);
        let iterative = policy_evaluation(&mdp, &pi, SolveOptions::default()).unwrap();
        let direct = policy_evaluation_direct(&mdp, &pi).unwrap();
        for (a, b) in iterative.v().unwrap().iter().zip(&direct) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn one_more_backup_changes_little() {
        let mdp = random_mdp(8, 6, 2, 0.5).unwrap();
        let pi = Policy::uniform(6, 2);
        let tol = 1e-10;
        let v = policy_evaluation(&mdp, &pi, SolveOptions::with_tol(tol)).unwrap();
        let v = v.v().unwrap();
        let backed = policy_reward(&mdp, &pi).unwrap() + policy_transition(&mdp, &pi).unwrap().dot(v) * mdp.gamma();
        assert!(sup_diff(&backed, v) <= tol);
    }

    #[test]
    fn evaluation_rejects_nonpositive_tol_and_caps_iterations() {
        let mdp = self_loop(1.0, 0.99);
        let pi = Policy::uniform(1, 1);
        assert!(matches!(
            policy_evaluation(&mdp, &pi, SolveOptions::with_tol(0.0)),
            Err(Error::Config(_))
        ));
        let opts = SolveOptions { tol: 1e-10, max_iters: 3 };
        assert!(matches!(policy_evaluation(&mdp, &pi, opts), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn value_iteration_single_action_equals_evaluation() {
        let mdp = random_mdp(21, 4, 1, 0.25).unwrap();
        let q = value_iteration(&mdp, SolveOptions::default()).unwrap();
        let v = policy_evaluation_direct(&mdp, &Policy::uniform(4, 1)).unwrap();
        for s in 0..4 {
            assert_abs_diff_eq!(q.q().unwrap()[[s, 0]], v[s], epsilon = 1e-9);
        }
        let zero = random_mdp(21, 4, 2, 1.0).unwrap();
        let q = value_iteration(&zero, SolveOptions::default()).unwrap();
        assert!(q.q().unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn value_iteration_matches_policy_enumeration() {
        let mdp = random_mdp(31, 2, 2, 0.0).unwrap();
        let q = value_iteration(&mdp, SolveOptions::default()).unwrap();
        let q = q.q().unwrap();
        let mut best = [f64::NEG_INFINITY; 2];
        for a0 in 0..2 {
            for a1 in 0..2 {
                let v = policy_evaluation_direct(&mdp, &Policy::deterministic(&[a0, a1], 2).unwrap()).unwrap();
                for s in 0..2 {
                    best[s] = best[s].max(v[s]);
                }
            }
        }
        for s in 0..2 {
            let vstar = q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_abs_diff_eq!(vstar, best[s], epsilon = 1e-9);
        }
    }

    #[test]
    fn random_mdp_examples() {
        assert_eq!(random_mdp(1, 5, 2, 0.3).unwrap(), random_mdp(1, 5, 2, 0.3).unwrap());
        assert!(random_mdp(1, 5, 2, 1.0).unwrap().reward().iter().all(|&r| r == 0.0));
        let mdp = random_mdp(7, 10, 2, 0.5).unwrap();
        assert_eq!(mdp.reward().iter().filter(|&&r| r == 0.0).count(), 10);
        assert!(random_mdp(1, 0, 2, 0.0).is_err());
        assert!(random_mdp(1, 2, 2, 1.5).is_err());
    }

    #[test]
    fn text_round_trip() {
        let mdp = random_mdp(12, 4, 3, 0.5).unwrap();
        let back = TabularMdp::from_text(&mdp.to_text()).unwrap();
        assert_eq!(mdp, back);
    }

    #[test]
    fn text_parse_reports_position() {
        let err = TabularMdp::from_text("states 1\nactions 1\ngamma 0.5\ntransition\n1 x\n").unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 5);
                assert_eq!(column, 2);
            }
            other => panic!("unexpected {other}"),
        }
    }
}
