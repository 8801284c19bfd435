//! Tabular n-step Q-learning over maze bins, trained on shaped rewards.
//!
//! Each gradient phase samples a batch from a FIFO replay buffer, brings the
//! reward and transition models up to date with the buffer contents,
//! recomputes the anchor, and applies n-step updates whose per-step rewards
//! are `r + eta * F`. Between phases the models and anchor are frozen, so
//! the online bonus trace telescopes within each phase.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::coverage::CoverageTracker;
use crate::envs::maze::{compass_actions, maze_reset, maze_step, MazeSpec, MazeState};
use crate::error::{Error, Result};
use crate::intrinsic::{compute_anchor_with, shaped_reward, shaping_bonus, Anchor, ShapingConfig, WorldModel};
use crate::mdp::argmax;
use crate::reward_model::{FeatureTransitionModel, TransitionRecord};

pub const N_ACTIONS: usize = 8;
pub const Q_ABORT: f64 = 1e6;
pub const CURVE_EVERY: usize = 1000;

pub const ACTION_STREAM: u64 = 1;
pub const ENV_STREAM: u64 = 2;
pub const REPLAY_STREAM: u64 = 3;

/// Independent generator for one purpose within a run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Q-table bin edge; `None` uses the layout's coverage cell.
    pub bin_size: Option<f64>,
    pub epsilon: f64,
    pub learning_rate: f64,
    pub n_step: usize,
    pub gamma: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub gradient_frequency: usize,
    pub total_steps: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            bin_size: None,
            epsilon: 0.2,
            learning_rate: 0.1,
            n_step: 3,
            gamma: 0.99,
            batch_size: 1024,
            buffer_capacity: 200_000,
            gradient_frequency: 2,
            total_steps: 100_000,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning rate must lie in (0, 1], got {}", self.learning_rate));
        }
        if self.n_step == 0 || self.batch_size == 0 || self.gradient_frequency == 0 {
            return bad("n_step, batch_size and gradient_frequency must be positive".into());
        }
        if self.buffer_capacity < self.batch_size {
            return bad(format!(
                "buffer capacity {} is below the batch size {}",
                self.buffer_capacity, self.batch_size
            ));
        }
        if let Some(b) = self.bin_size {
            if !(b > 0.0) {
                return bad(format!("bin size must be positive, got {b}"));
            }
        }
        Ok(())
    }
}

/// Row-major square bins over the maze bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinGrid {
    origin: [f64; 2],
    size: f64,
    rows: usize,
    cols: usize,
}

impl BinGrid {
    pub fn new(spec: &MazeSpec, size: f64) -> Self {
        Self {
            origin: spec.bounds.min,
            size,
            rows: (spec.bounds.height() / size - 1e-9).ceil().max(1.0) as usize,
            cols: (spec.bounds.width() / size - 1e-9).ceil().max(1.0) as usize,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.rows * self.cols
    }

    pub fn bin_of(&self, p: [f64; 2]) -> usize {
        let c = (((p[0] - self.origin[0]) / self.size).floor().max(0.0) as usize).min(self.cols - 1);
        let r = (((p[1] - self.origin[1]) / self.size).floor().max(0.0) as usize).min(self.rows - 1);
        r * self.cols + c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_actions: usize,
    q: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_bins: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            q: vec![0.0; n_bins * n_actions],
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, bin: usize) -> &[f64] {
        &self.q[bin * self.n_actions..(bin + 1) * self.n_actions]
    }

    pub fn get(&self, bin: usize, a: usize) -> f64 {
        self.q[bin * self.n_actions + a]
    }

    pub fn set(&mut self, bin: usize, a: usize, value: f64) {
        self.q[bin * self.n_actions + a] = value;
    }

    pub fn max_value(&self, bin: usize) -> f64 {
        self.row(bin).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.q.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.q.iter().sum::<f64>() / self.q.len() as f64
    }

    pub fn is_zero(&self) -> bool {
        self.q.iter().all(|&x| x == 0.0)
    }
}

/// Epsilon-greedy; the greedy choice breaks ties toward the lowest index.
/// With `epsilon == 0` no randomness is drawn.
pub fn select_action<R: Rng + ?Sized>(q: &QTable, bin: usize, epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q.n_actions())
    } else {
        argmax(q.row(bin).iter().copied())
    }
}

/// Pairs element `k` with element `perm(k)` for a seeded uniform permutation.
pub fn rearrange_batch<T: Clone>(batch: &[T], seed: u64) -> Vec<(T, T)> {
    let mut perm: Vec<usize> = (0..batch.len()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    batch.iter().cloned().zip(perm.into_iter().map(|k| batch[k].clone())).collect()
}

/// Bounded FIFO of transitions with stable insertion ids.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<S> {
    capacity: usize,
    slots: Vec<TransitionRecord<S>>,
    next_id: u64,
}

impl<S: Clone> ReplayBuffer<S> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            slots: Vec::with_capacity(capacity.min(1 << 20)),
            next_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Id of the oldest stored record.
    pub fn first_id(&self) -> u64 {
        self.next_id - self.slots.len() as u64
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn contains(&self, id: u64) -> bool {
        id >= self.first_id() && id < self.next_id
    }

    pub fn get(&self, id: u64) -> &TransitionRecord<S> {
        debug_assert!(self.contains(id));
        &self.slots[(id % self.capacity as u64) as usize]
    }

    /// Appends a record, returning the evicted one when full.
    pub fn push(&mut self, rec: TransitionRecord<S>) -> Option<TransitionRecord<S>> {
        let slot = (self.next_id % self.capacity as u64) as usize;
        self.next_id += 1;
        if self.slots.len() < self.capacity {
            self.slots.push(rec);
            None
        } else {
            Some(std::mem::replace(&mut self.slots[slot], rec))
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &TransitionRecord<S>> {
        (self.first_id()..self.next_id).map(move |id| self.get(id))
    }
}

type Position = [f64; 2];

#[derive(Debug, Clone, Copy, Default)]
struct RewardStats {
    count: f64,
    sum: f64,
}

/// Per-bin reward means and mean next positions, kept equal to a refit on
/// the replay buffer as of the last phase boundary.
struct MazeModels {
    grid: BinGrid,
    rewards: Vec<RewardStats>,
    transitions: FeatureTransitionModel,
    /// Reward targets of records already folded into `rewards`, by slot.
    targets: Vec<f64>,
    /// Records up to this id are in the transition model.
    observed_until: u64,
    /// Records up to this id have their reward target folded in.
    targets_until: u64,
    evicted: Vec<(TransitionRecord<Position>, Option<f64>)>,
}

impl MazeModels {
    fn new(grid: BinGrid, capacity: usize) -> Self {
        Self {
            grid,
            rewards: vec![RewardStats::default(); grid.n_bins() * N_ACTIONS],
            transitions: FeatureTransitionModel::new(grid.n_bins(), N_ACTIONS, 2),
            targets: vec![0.0; capacity],
            observed_until: 0,
            targets_until: 0,
            evicted: Vec::new(),
        }
    }

    fn note_eviction(&mut self, id: u64, rec: TransitionRecord<Position>, capacity: usize) {
        let target = (id < self.targets_until).then(|| self.targets[(id % capacity as u64) as usize]);
        let observed = id < self.observed_until;
        if observed {
            self.evicted.push((rec, target));
        }
    }

    fn sync(&mut self, buffer: &ReplayBuffer<Position>, n_step: usize, gamma: f64) {
        for (rec, target) in self.evicted.drain(..) {
            let b = self.grid.bin_of(rec.s);
            self.transitions.forget(b, rec.a, &rec.s_next);
            if let Some(t) = target {
                let st = &mut self.rewards[b * N_ACTIONS + rec.a];
                st.count -= 1.0;
                st.sum -= t;
                if st.count == 0.0 {
                    st.sum = 0.0;
                }
            }
        }
        let first = buffer.first_id();
        self.observed_until = self.observed_until.max(first);
        self.targets_until = self.targets_until.max(first);
        while self.observed_until < buffer.next_id() {
            let rec = buffer.get(self.observed_until);
            self.transitions.observe(self.grid.bin_of(rec.s), rec.a, &rec.s_next);
            self.observed_until += 1;
        }
        while let Some(t) = mc_target_at(buffer, self.targets_until, n_step, gamma) {
            let rec = buffer.get(self.targets_until);
            let b = self.grid.bin_of(rec.s);
            let st = &mut self.rewards[b * N_ACTIONS + rec.a];
            st.count += 1.0;
            st.sum += t;
            self.targets[(self.targets_until % buffer.capacity() as u64) as usize] = t;
            self.targets_until += 1;
        }
    }
}

/// Discounted n-step reward sum from record `id`, or `None` while the
/// window is still open.
fn mc_target_at(buffer: &ReplayBuffer<Position>, id: u64, n_step: usize, gamma: f64) -> Option<f64> {
    if !buffer.contains(id) {
        return None;
    }
    let mut total = 0.0;
    let mut discount = 1.0;
    for k in 0..n_step as u64 {
        if !buffer.contains(id + k) {
            return None;
        }
        let rec = buffer.get(id + k);
        total += discount * rec.r;
        discount *= gamma;
        if rec.done {
            break;
        }
    }
    Some(total)
}

impl WorldModel for MazeModels {
    type State = Position;

    fn feature_dim(&self) -> usize {
        2
    }

    fn reward_mean(&self, s: &Position, a: usize) -> f64 {
        let st = self.rewards[self.grid.bin_of(*s) * N_ACTIONS + a];
        if st.count > 0.0 {
            st.sum / st.count
        } else {
            0.0
        }
    }

    fn predicted_feature(&self, s: &Position, a: usize, out: &mut [f64]) {
        self.transitions.predict_into(self.grid.bin_of(*s), a, s, out);
    }

    fn transport_to_point(&self, s: &Position, a: usize, point: &[f64]) -> f64 {
        let mut z = [0.0; 2];
        self.predicted_feature(s, a, &mut z);
        dist(&z, point)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub step: usize,
    pub coverage: f64,
    /// Mean online bonus `F` since the previous point.
    pub mean_bonus: f64,
    pub mean_q: f64,
}

/// One environment step of the online bonus computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BonusRecord {
    pub step: usize,
    /// Gradient phase whose anchor and models produced the potentials.
    pub phase: usize,
    pub r: f64,
    pub phi: f64,
    pub phi_next: f64,
    pub bonus: f64,
    pub shaped: f64,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    pub final_coverage: f64,
    pub bonus_trace: Vec<BonusRecord>,
    pub coverage: CoverageTracker,
    pub q: QTable,
    pub phases: usize,
    pub anchors: Vec<Anchor>,
}

/// Uniform-policy state potential, memoized per bin for one phase. Every
/// confident `(bin, a)` term depends on the bin alone; unseen actions
/// predict the state itself and contribute `|s - z_star|`.
struct PotentialCache {
    stamp: Vec<usize>,
    base: Vec<f64>,
    unseen: Vec<f64>,
}

impl PotentialCache {
    fn new(n_bins: usize) -> Self {
        Self {
            stamp: vec![usize::MAX; n_bins],
            base: vec![0.0; n_bins],
            unseen: vec![0.0; n_bins],
        }
    }

    fn phi(&mut self, s: &Position, phase: usize, m: &MazeModels, anchor: &Anchor, cfg: &ShapingConfig) -> f64 {
        let b = m.grid.bin_of(*s);
        if self.stamp[b] != phase {
            let mut base = 0.0;
            let mut unseen = 0.0;
            let mut z = [0.0; 2];
            for a in 0..N_ACTIONS {
                base += cfg.c_r * (m.reward_mean(s, a) - anchor.r_star).abs();
                if cfg.c_t == 0.0 {
                    continue;
                }
                if m.transitions.predict_into(b, a, s, &mut z) {
                    base += cfg.c_t * dist(&z, &anchor.z_star);
                } else {
                    unseen += cfg.c_t;
                }
            }
            self.stamp[b] = phase;
            self.base[b] = base;
            self.unseen[b] = unseen;
        }
        let own = if self.unseen[b] > 0.0 { self.unseen[b] * dist(s, &anchor.z_star) } else { 0.0 };
        (self.base[b] + own) / N_ACTIONS as f64
    }
}

fn dist(p: &[f64], q: &[f64]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Runs the collect/fit/shape/update loop. `shaping = None` is the
/// unshaped control: no models, anchors or bonuses are computed.
pub fn train(spec: &MazeSpec, cfg: &AgentConfig, shaping: Option<&ShapingConfig>) -> Result<RunResult> {
    cfg.validate()?;
    if let Some(sh) = shaping {
        sh.validate()?;
    }
    let grid = BinGrid::new(spec, cfg.bin_size.unwrap_or(spec.cell_size));
    let actions = compass_actions(spec.max_action());
    let mut action_rng = stream_rng(cfg.seed, ACTION_STREAM);
    let mut env_rng = stream_rng(cfg.seed, ENV_STREAM);
    let mut replay_rng = stream_rng(cfg.seed, REPLAY_STREAM);

    let mut q = QTable::zeros(grid.n_bins(), N_ACTIONS);
    let mut coverage = CoverageTracker::new(spec)?;
    let mut buffer: ReplayBuffer<Position> = ReplayBuffer::new(cfg.buffer_capacity);
    let mut models = shaping.map(|_| MazeModels::new(grid, cfg.buffer_capacity));
    let mut phi = PotentialCache::new(grid.n_bins());
    let mut anchor: Option<Anchor> = None;
    let mut anchors = Vec::new();
    let mut phases = 0usize;
    let mut batch_ids: Vec<u64> = Vec::with_capacity(cfg.batch_size);
    let mut batch: Vec<TransitionRecord<Position>> = Vec::with_capacity(cfg.batch_size);

    let mut state: MazeState = maze_reset(spec, &mut env_rng);
    coverage.update(state.position);
    let mut curve = vec![CurvePoint {
        step: 0,
        coverage: coverage.ratio(),
        mean_bonus: 0.0,
        mean_q: 0.0,
    }];
    let mut bonus_trace = Vec::new();
    let (mut bonus_sum, mut bonus_n) = (0.0, 0usize);

    for step in 1..=cfg.total_steps {
        let a = select_action(&q, grid.bin_of(state.position), cfg.epsilon, &mut action_rng);
        let (next, r, done) = maze_step(spec, &state, actions[a])?;
        coverage.update(next.position);
        let rec = TransitionRecord {
            s: state.position,
            a,
            r,
            s_next: next.position,
            done,
        };
        let id = buffer.next_id();
        if let Some(old) = buffer.push(rec) {
            if let Some(m) = models.as_mut() {
                m.note_eviction(id - cfg.buffer_capacity as u64, old, cfg.buffer_capacity);
            }
        }

        if let (Some(sh), Some(m), Some(anc)) = (shaping, models.as_ref(), anchor.as_ref()) {
            let p0 = phi.phi(&rec.s, phases, m, anc, sh);
            let p1 = phi.phi(&rec.s_next, phases, m, anc, sh);
            let f = shaping_bonus(p0, p1, sh.gamma);
            bonus_sum += f;
            bonus_n += 1;
            bonus_trace.push(BonusRecord {
                step,
                phase: phases,
                r,
                phi: p0,
                phi_next: p1,
                bonus: f,
                shaped: shaped_reward(r, f, sh.eta),
                done,
            });
        }

        if step % cfg.gradient_frequency == 0 && buffer.len() >= cfg.batch_size {
            phases += 1;
            batch_ids.clear();
            let first = buffer.first_id();
            let len = buffer.len() as u64;
            batch_ids.extend((0..cfg.batch_size).map(|_| first + replay_rng.gen_range(0..len)));

            if let (Some(sh), Some(m)) = (shaping, models.as_mut()) {
                m.sync(&buffer, cfg.n_step, cfg.gamma);
                batch.clear();
                batch.extend(batch_ids.iter().map(|&i| *buffer.get(i)));
                let anc = compute_anchor_with(sh.anchor_policy, &batch, &*m, &spec.start, &mut replay_rng)?;
                anchors.push(anc.clone());
                anchor = Some(anc);
            }

            for &start in &batch_ids {
                let mut target = 0.0;
                let mut discount = 1.0;
                let mut terminal = false;
                let mut last = start;
                for k in 0..cfg.n_step as u64 {
                    let id = start + k;
                    if !buffer.contains(id) {
                        break;
                    }
                    let rec = buffer.get(id);
                    let mut reward = rec.r;
                    if let (Some(sh), Some(m), Some(anc)) = (shaping, models.as_ref(), anchor.as_ref()) {
                        let p0 = phi.phi(&rec.s, phases, m, anc, sh);
                        let p1 = phi.phi(&rec.s_next, phases, m, anc, sh);
                        reward = shaped_reward(reward, shaping_bonus(p0, p1, sh.gamma), sh.eta);
                    }
                    target += discount * reward;
                    discount *= cfg.gamma;
                    last = id;
                    if rec.done {
                        terminal = true;
                        break;
                    }
                }
                if !terminal {
                    target += discount * q.max_value(grid.bin_of(buffer.get(last).s_next));
                }
                let head = buffer.get(start);
                let b = grid.bin_of(head.s);
                let old = q.get(b, head.a);
                let new = old + cfg.learning_rate * (target - old);
                if !new.is_finite() || new.abs() > Q_ABORT {
                    return Err(Error::QDivergence {
                        step,
                        max_abs_q: new.abs().max(q.max_abs()),
                    });
                }
                q.set(b, head.a, new);
            }
        }

        state = if done { maze_reset(spec, &mut env_rng) } else { next };
        if done {
            coverage.update(state.position);
        }
        if step % CURVE_EVERY == 0 || step == cfg.total_steps {
            curve.push(CurvePoint {
                step,
                coverage: coverage.ratio(),
                mean_bonus: if bonus_n > 0 { bonus_sum / bonus_n as f64 } else { 0.0 },
                mean_q: q.mean(),
            });
            bonus_sum = 0.0;
            bonus_n = 0;
        }
    }

    Ok(RunResult {
        seed: cfg.seed,
        final_coverage: coverage.ratio(),
        curve,
        bonus_trace,
        coverage,
        q,
        phases,
        anchors,
    })
}

/// Uniform random actions with the agent's streams: the reference an
/// unshaped `epsilon = 1` run must reproduce.
pub fn random_walk_coverage(spec: &MazeSpec, total_steps: usize, seed: u64) -> Result<Vec<f64>> {
    let actions = compass_actions(spec.max_action());
    let mut action_rng = stream_rng(seed, ACTION_STREAM);
    let mut env_rng = stream_rng(seed, ENV_STREAM);
    let mut coverage = CoverageTracker::new(spec)?;
    let mut state = maze_reset(spec, &mut env_rng);
    coverage.update(state.position);
    let mut out = vec![coverage.ratio()];
    for step in 1..=total_steps {
        let _: f64 = action_rng.gen();
        let a = action_rng.gen_range(0..N_ACTIONS);
        let (next, _, done) = maze_step(spec, &state, actions[a])?;
        coverage.update(next.position);
        state = if done { maze_reset(spec, &mut env_rng) } else { next };
        if done {
            coverage.update(state.position);
        }
        if step % CURVE_EVERY == 0 || step == total_steps {
            out.push(coverage.ratio());
        }
    }
    Ok(out)
}
