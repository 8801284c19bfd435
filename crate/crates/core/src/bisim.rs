//! Classic and predictive on-policy bisimulation operators and their fixed
//! points.
//!
//! Both operators have the form
//!
//! ```text
//! T(d)(i, j) = c_R * reward_gap(i, j) + c_T * W1(d)(P(.|i), P(.|j))
//! ```
//!
//! and differ only in `reward_gap`: `|r^pi_i - r^pi_j|` for the classic
//! operator, the expected absolute difference of predicted rewards for the
//! predictive one. Both are evaluated on unordered pairs and mirrored, with a
//! zero diagonal.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::mdp::{policy_reward, policy_transition, Policy, TabularMdp};
use crate::reward_model::{EmpiricalTransitionModel, GaussianRewardModel};
use crate::transport::w1_dense_rows;

/// Symmetric, nonnegative, zero-diagonal distance table over states.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    d: Array2<f64>,
}

impl MetricMatrix {
    pub fn new(d: Array2<f64>) -> Result<Self> {
        let (n, m) = d.dim();
        if n != m {
            return Err(Error::Input(format!("metric must be square, got {n}x{m}")));
        }
        for i in 0..n {
            if d[[i, i]] != 0.0 {
                return Err(Error::Input(format!("d({i}, {i}) = {} is not zero", d[[i, i]])));
            }
            for j in 0..i {
                let (x, y) = (d[[i, j]], d[[j, i]]);
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::Input(format!("d({i}, {j}) = {x} is not a distance")));
                }
                if x != y {
                    return Err(Error::Input(format!("d is not symmetric at ({i}, {j}): {x} vs {y}")));
                }
            }
        }
        Ok(Self { d })
    }

    pub fn zeros(n: usize) -> Self {
        Self { d: Array2::zeros((n, n)) }
    }

    /// `c` everywhere off the diagonal.
    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { c }))
    }

    /// Build from a function evaluated once per unordered pair `i < j`.
    pub fn from_pairs(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut d = Array2::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                d[[i, j]] = v;
                d[[j, i]] = v;
            }
        }
        Self { d }
    }

    pub fn n_states(&self) -> usize {
        self.d.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[[i, j]]
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.d
    }

    pub fn sup_distance(&self, other: &MetricMatrix) -> f64 {
        self.d
            .iter()
            .zip(other.d.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Whitespace-separated dense table, one row per state.
    pub fn to_table(&self) -> String {
        self.d
            .axis_iter(Axis(0))
            .map(|row| row.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    }
}

/// Largest pairwise distance within `subset`.
pub fn diameter(d: &MetricMatrix, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::Input("diameter of an empty set".into()));
    }
    if let Some(&s) = subset.iter().find(|&&s| s >= d.n_states()) {
        return Err(Error::Input(format!("state {s} out of range")));
    }
    let mut best: f64 = 0.0;
    for (k, &i) in subset.iter().enumerate() {
        for &j in &subset[k + 1..] {
            best = best.max(d.get(i, j));
        }
    }
    Ok(best)
}

/// Diameter over every state.
pub fn full_diameter(d: &MetricMatrix) -> f64 {
    d.d.iter().copied().fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorMode {
    Classic,
    Predictive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyMode {
    /// Folded-normal mean, exact.
    ClosedForm,
    /// Average of `|x - y|` over reparameterized draws.
    MonteCarlo { n_samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorConfig {
    pub c_r: f64,
    pub c_t: f64,
    pub mode: OperatorMode,
    pub discrepancy: DiscrepancyMode,
}

impl OperatorConfig {
    pub fn classic(c_r: f64, c_t: f64) -> Self {
        Self {
            c_r,
            c_t,
            mode: OperatorMode::Classic,
            discrepancy: DiscrepancyMode::ClosedForm,
        }
    }

    pub fn predictive(c_r: f64, c_t: f64) -> Self {
        Self {
            mode: OperatorMode::Predictive,
            ..Self::classic(c_r, c_t)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_r > 0.0 && self.c_r.is_finite()) {
            return Err(Error::Config(format!("c_R must be positive, got {}", self.c_r)));
        }
        if !(0.0..1.0).contains(&self.c_t) {
            return Err(Error::Config(format!("c_T must lie in [0, 1), got {}", self.c_t)));
        }
        if let DiscrepancyMode::MonteCarlo { n_samples: 0, .. } = self.discrepancy {
            return Err(Error::Config("Monte Carlo discrepancy needs at least one sample".into()));
        }
        Ok(())
    }

    fn expect_mode(&self, mode: OperatorMode) -> Result<()> {
        self.validate()?;
        if self.mode != mode {
            return Err(Error::Config(format!("operator config is {:?}, expected {mode:?}", self.mode)));
        }
        Ok(())
    }
}

/// `E|Z|` for `Z ~ N(m, v)`; `|m|` when `v = 0`.
pub fn folded_normal_mean(m: f64, v: f64) -> f64 {
    if v <= 0.0 {
        return m.abs();
    }
    let sd = v.sqrt();
    (2.0 * v / std::f64::consts::PI).sqrt() * (-m * m / (2.0 * v)).exp() + m * (1.0 - erfc(m / (sd * std::f64::consts::SQRT_2)))
}

/// Mixes the seed with the pair so Monte Carlo draws are reproducible per
/// pair regardless of evaluation order.
fn pair_seed(seed: u64, i: usize, j: usize) -> u64 {
    let mut x = seed ^ ((i as u64) << 32 | j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 31;
    x.wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

fn check_model_cells(pi: &Policy, model: &GaussianRewardModel, transitions: Option<&EmpiricalTransitionModel>) -> Result<()> {
    let mut missing = Vec::new();
    for s in 0..pi.n_states() {
        for a in 0..pi.n_actions() {
            if pi.prob(s, a) > 0.0 && (!model.has_cell(s, a) || transitions.is_some_and(|t| !t.has_cell(s, a))) {
                missing.push((s, a));
            }
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingCells(missing))
    }
}

/// `sum_{a_i, a_j} pi(a_i|s_i) pi(a_j|s_j) E|X - Y|` for independent
/// Gaussian reward predictions `X`, `Y`.
pub fn delta_r_predictive(
    model: &GaussianRewardModel,
    pi: &Policy,
    s_i: usize,
    s_j: usize,
    cfg: &OperatorConfig,
) -> Result<f64> {
    cfg.validate()?;
    if s_i >= pi.n_states() || s_j >= pi.n_states() {
        return Err(Error::Input(format!("states ({s_i}, {s_j}) out of range")));
    }
    let m = pi.n_actions();
    let mut total = 0.0;
    match cfg.discrepancy {
        DiscrepancyMode::ClosedForm => {
            for a in 0..m {
                let pa = pi.prob(s_i, a);
                if pa == 0.0 {
                    continue;
                }
                let (mu_a, sd_a) = model.predict(s_i, a);
                for b in 0..m {
                    let pb = pi.prob(s_j, b);
                    if pb == 0.0 {
                        continue;
                    }
                    let (mu_b, sd_b) = model.predict(s_j, b);
                    total += pa * pb * folded_normal_mean(mu_a - mu_b, sd_a * sd_a + sd_b * sd_b);
                }
            }
        }
        DiscrepancyMode::MonteCarlo { n_samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(pair_seed(seed, s_i, s_j));
            let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
            for a in 0..m {
                let pa = pi.prob(s_i, a);
                if pa == 0.0 {
                    continue;
                }
                let (mu_a, sd_a) = model.predict(s_i, a);
                for b in 0..m {
                    let pb = pi.prob(s_j, b);
                    if pb == 0.0 {
                        continue;
                    }
                    let (mu_b, sd_b) = model.predict(s_j, b);
                    let mut acc = 0.0;
                    for _ in 0..n_samples {
                        let x = mu_a + sd_a * std_normal.sample(&mut rng);
                        let y = mu_b + sd_b * std_normal.sample(&mut rng);
                        acc += (x - y).abs();
                    }
                    total += pa * pb * acc / n_samples as f64;
                }
            }
        }
    }
    Ok(total)
}

/// A bisimulation operator with its `d`-independent parts precomputed, ready
/// for repeated application inside a fixed-point loop.
#[derive(Debug, Clone)]
pub struct BisimOperator {
    /// `c_R * reward_gap(i, j)`.
    reward_term: Array2<f64>,
    /// Policy-marginal next-state distributions, one row per state.
    p_pi: Array2<f64>,
    c_t: f64,
}

impl BisimOperator {
    pub fn classic(mdp: &TabularMdp, pi: &Policy, cfg: &OperatorConfig) -> Result<Self> {
        cfg.expect_mode(OperatorMode::Classic)?;
        let r = policy_reward(mdp, pi)?;
        let p_pi = policy_transition(mdp, pi)?;
        let n = mdp.n_states();
        let reward_term = Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j {
                0.0
            } else {
                cfg.c_r * (r[i] - r[j]).abs()
            }
        });
        Ok(Self {
            reward_term,
            p_pi,
            c_t: cfg.c_t,
        })
    }

    /// Predictive operator over a fitted reward model and an empirical
    /// transition model. Every cell with positive policy mass must be
    /// covered by both models.
    pub fn predictive(
        pi: &Policy,
        model: &GaussianRewardModel,
        transitions: &EmpiricalTransitionModel,
        cfg: &OperatorConfig,
    ) -> Result<Self> {
        cfg.expect_mode(OperatorMode::Predictive)?;
        let n = pi.n_states();
        if transitions.n_states() != n {
            return Err(Error::Config(format!(
                "transition model has {} states, policy has {n}",
                transitions.n_states()
            )));
        }
        check_model_cells(pi, model, Some(transitions))?;
        let mut p_pi = Array2::zeros((n, n));
        for s in 0..n {
            for a in 0..pi.n_actions() {
                let p = pi.prob(s, a);
                if p > 0.0 {
                    for (t, q) in transitions.query(s, a).probs.into_iter().enumerate() {
                        p_pi[[s, t]] += p * q;
                    }
                }
            }
        }
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let gaps: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| delta_r_predictive(model, pi, i, j, cfg))
            .collect::<Result<_>>()?;
        let mut reward_term = Array2::zeros((n, n));
        for (&(i, j), g) in pairs.iter().zip(gaps) {
            reward_term[[i, j]] = cfg.c_r * g;
            reward_term[[j, i]] = cfg.c_r * g;
        }
        Ok(Self {
            reward_term,
            p_pi,
            c_t: cfg.c_t,
        })
    }

    pub fn n_states(&self) -> usize {
        self.p_pi.nrows()
    }

    pub fn c_t(&self) -> f64 {
        self.c_t
    }

    /// The reward part of the operator, `c_R * reward_gap`.
    pub fn reward_term(&self) -> &Array2<f64> {
        &self.reward_term
    }

    pub fn policy_transition(&self) -> &Array2<f64> {
        &self.p_pi
    }

    pub fn apply(&self, d: &MetricMatrix) -> Result<MetricMatrix> {
        let n = self.n_states();
        if d.n_states() != n {
            return Err(Error::Input(format!("metric has {} states, operator {n}", d.n_states())));
        }
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let cost = d.as_array();
        let values: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let w = if self.c_t == 0.0 {
                    0.0
                } else {
                    w1_dense_rows(
                        self.p_pi.row(i).as_slice().expect("standard layout"),
                        self.p_pi.row(j).as_slice().expect("standard layout"),
                        cost,
                    )
                };
                self.reward_term[[i, j]] + self.c_t * w
            })
            .collect();
        let mut out = Array2::zeros((n, n));
        for (&(i, j), v) in pairs.iter().zip(values) {
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
        Ok(MetricMatrix { d: out })
    }
}

/// One application of the classic pi-bisimulation operator.
pub fn apply_classic_operator(mdp: &TabularMdp, pi: &Policy, d: &MetricMatrix, cfg: &OperatorConfig) -> Result<MetricMatrix> {
    BisimOperator::classic(mdp, pi, cfg)?.apply(d)
}

/// One application of the predictive operator.
pub fn apply_predictive_operator(
    pi: &Policy,
    model: &GaussianRewardModel,
    transitions: &EmpiricalTransitionModel,
    d: &MetricMatrix,
    cfg: &OperatorConfig,
) -> Result<MetricMatrix> {
    BisimOperator::predictive(pi, model, transitions, cfg)?.apply(d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Contraction modulus of the operator (its `c_T`).
    pub modulus: f64,
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub metric: MetricMatrix,
    /// Operator applications performed.
    pub iterations: usize,
    /// `|d_{k+1} - d_k|_inf` per application.
    pub residuals: Vec<f64>,
    /// A-priori bound on the applications needed.
    pub iteration_bound: usize,
}

/// `ceil(log(tol (1 - c) / r0) / log c)`, at least 1.
pub fn a_priori_iterations(tol: f64, modulus: f64, first_residual: f64) -> usize {
    if modulus <= 0.0 || first_residual <= 0.0 {
        return 1;
    }
    let k = ((tol * (1.0 - modulus) / first_residual).ln() / modulus.ln()).ceil();
    if k.is_finite() && k > 1.0 {
        k as usize
    } else {
        1
    }
}

/// Banach iteration `d_{k+1} = T(d_k)` from `d0`.
///
/// Stops once `c / (1 - c) * |d_{k+1} - d_k|_inf <= tol`, which bounds the
/// distance of the returned iterate to the true fixed point by `tol` and
/// implies `|T(d) - d|_inf <= tol`.
pub fn fixed_point(
    mut operator: impl FnMut(&MetricMatrix) -> Result<MetricMatrix>,
    d0: MetricMatrix,
    opts: FixedPointOptions,
) -> Result<FixedPoint> {
    if !(opts.tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if !(0.0..1.0).contains(&opts.modulus) {
        return Err(Error::Config(format!("contraction modulus must lie in [0, 1), got {}", opts.modulus)));
    }
    let scale = opts.modulus / (1.0 - opts.modulus);
    let mut d = d0;
    let mut residuals = Vec::new();
    let mut iteration_bound = 1;
    for k in 0..opts.max_iters {
        let next = operator(&d)?;
        let r = next.sup_distance(&d);
        if k == 0 {
            iteration_bound = a_priori_iterations(opts.tol, opts.modulus, r);
        }
        residuals.push(r);
        d = next;
        if scale * r <= opts.tol {
            return Ok(FixedPoint {
                metric: d,
                iterations: k + 1,
                residuals,
                iteration_bound,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iters,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}

/// Fixed point of a prepared operator from `d0`.
pub fn solve(op: &BisimOperator, d0: MetricMatrix, tol: f64, max_iters: usize) -> Result<FixedPoint> {
    fixed_point(
        |d| op.apply(d),
        d0,
        FixedPointOptions {
            tol,
            max_iters,
            modulus: op.c_t(),
        },
    )
}
