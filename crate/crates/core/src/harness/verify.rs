//! Seeded oracle suites behind `teb verify`.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::bisim::{delta_r_predictive, full_diameter, solve, BisimOperator, MetricMatrix, OperatorConfig};
use crate::embedding::{all_pairs, fit_embedding, regression_gradient, regression_loss, EmbeddingOptions, EmbeddingTable};
use crate::envs::chain::reward_free_chain;
use crate::error::{Error, Result};
use crate::harness::config::derive_seed;
use crate::harness::write_file;
use crate::intrinsic::verify_policy_invariance;
use crate::mdp::{policy_evaluation_direct, policy_reward, random_mdp, Policy, TabularMdp};
use crate::oracle::{abs_difference_mc, exhaustive_w1, finite_difference_gradient, folded_normal_mc};
use crate::reward_model::{EmpiricalTransitionModel, GaussianRewardModel, SIGMA_MAX, SIGMA_MIN};
use crate::transport::{w1_discrete, CostMatrix, DiscreteDistribution};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MC_SAMPLES: usize = 10_000_000;
const MAX_ITERS: usize = 100_000;

/// Metric pairs drawn per MDP in the contraction suite.
pub const CONTRACTION_PAIRS: usize = 50;
pub const CONTRACTION_SLACK: f64 = 1e-12;
pub const DIAMETER_SLACK: f64 = 1e-9;
pub const VALUE_BOUND_SLACK: f64 = 1e-9;
pub const INVARIANCE_LIMIT: f64 = 1e-6;
pub const DEGENERATE_DIAMETER: f64 = 1e-9;
pub const NONDEGENERATE_DIAMETER: f64 = 0.01;
pub const DEGENERACY_BOUND_SLACK: f64 = 1e-6;
pub const MC_RELATIVE_TOL: f64 = 1e-3;
pub const DISCREPANCY_ABS_TOL: f64 = 2e-3;
pub const TRANSPORT_TOL: f64 = 1e-9;
pub const METRIC_AXIOM_TOL: f64 = 1e-12;
pub const GRADIENT_REL_TOL: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-5;
pub const TWO_STATE_TOL: f64 = 1e-3;

/// Reward-free chain used by the degeneracy suite.
pub const CHAIN_STATES: usize = 5;
pub const CHAIN_VARIANCE: f64 = 0.25;
pub const CHAIN_C_R: f64 = 1.0;
pub const CHAIN_C_T: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Contraction,
    Diameter,
    ValueBound,
    Invariance,
    Degeneracy,
    Gradients,
    Transport,
    Discrepancy,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Contraction,
        Suite::Diameter,
        Suite::ValueBound,
        Suite::Invariance,
        Suite::Degeneracy,
        Suite::Gradients,
        Suite::Transport,
        Suite::Discrepancy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Contraction => "contraction",
            Suite::Diameter => "diameter",
            Suite::ValueBound => "value_bound",
            Suite::Invariance => "invariance",
            Suite::Degeneracy => "degeneracy",
            Suite::Gradients => "gradients",
            Suite::Transport => "transport",
            Suite::Discrepancy => "discrepancy",
        }
    }

    pub fn default_instances(self) -> usize {
        match self {
            Suite::Contraction | Suite::Diameter => 50,
            Suite::ValueBound | Suite::Invariance => 100,
            Suite::Transport => 200,
            Suite::Gradients | Suite::Discrepancy => 20,
            Suite::Degeneracy => 1,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub master_seed: u64,
    /// `None` uses the suite default.
    pub instances: Option<usize>,
    pub tol: f64,
    pub mc_samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            master_seed: 0,
            instances: None,
            tol: DEFAULT_TOL,
            mc_samples: DEFAULT_MC_SAMPLES,
        }
    }
}

/// One checked instance. `pass` iff `residual <= limit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceResult {
    pub instance: usize,
    pub seed: u64,
    pub check: String,
    pub residual: f64,
    pub limit: f64,
    pub pass: bool,
    pub detail: String,
}

impl InstanceResult {
    fn new(instance: usize, seed: u64, check: &str, residual: f64, limit: f64, detail: String) -> Self {
        Self {
            instance,
            seed,
            check: check.to_string(),
            residual,
            limit,
            pass: residual <= limit,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub results: Vec<InstanceResult>,
    /// Everything needed to rebuild each failing instance.
    pub failures: Vec<serde_json::Value>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn n_passed(&self) -> usize {
        self.results.iter().filter(|r| r.pass).count()
    }

    /// Largest residual of a given check.
    pub fn max_residual(&self, check: &str) -> f64 {
        self.results
            .iter()
            .filter(|r| r.check == check)
            .map(|r| r.residual)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut out = format!("# teb verify suite={} config={config_hash}\n", self.suite);
        out.push_str("instance,seed,check,residual,limit,pass,detail\n");
        for r in &self.results {
            out.push_str(&format!(
                "{},{},{},{:.9e},{:.3e},{},{}\n",
                r.instance, r.seed, r.check, r.residual, r.limit, r.pass, r.detail
            ));
        }
        out
    }
}

struct Instance {
    mdp: TabularMdp,
    pi: Policy,
    model: GaussianRewardModel,
}

fn random_policy(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Result<Policy> {
    if rng.gen_bool(0.3) {
        let acts: Vec<usize> = (0..n).map(|_| rng.gen_range(0..m)).collect();
        return Policy::deterministic(&acts, m);
    }
    let probs = Array2::from_shape_fn((n, m), |_| rng.gen_range(0.05..1.0));
    let sums = probs.sum_axis(ndarray::Axis(1));
    Policy::new(Array2::from_shape_fn((n, m), |(s, a)| probs[[s, a]] / sums[s]))
}

/// A random MDP (at most 10 states, 3 actions), policy, and a mean-unbiased
/// Gaussian reward model with random spreads.
fn random_instance(seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=10);
    let m = rng.gen_range(1..=3);
    let sparsity = rng.gen_range(0.0..0.9);
    let mdp = random_mdp(seed, n, m, sparsity)?;
    let pi = random_policy(&mut rng, n, m)?;
    let stds: Vec<f64> = (0..n * m).map(|_| rng.gen_range(0.05..SIGMA_MAX)).collect();
    let model = GaussianRewardModel::unbiased_for(&mdp, |s, a| stds[s * m + a], SIGMA_MIN, SIGMA_MAX)?;
    Ok(Instance { mdp, pi, model })
}

fn random_metric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> MetricMatrix {
    let vals: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..scale)).collect();
    MetricMatrix::from_pairs(n, |i, j| vals[i * n + j])
}

fn replay(inst: &Instance, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "mdp": inst.mdp.to_text(),
        "policy": inst.pi.probs().outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
        "reward_std": inst.model.cells().map(|(k, c)| (k.0, k.1, c.std)).collect::<Vec<_>>(),
        "params": extra,
    })
}

fn operators(inst: &Instance, c_r: f64, c_t: f64) -> Result<[(&'static str, BisimOperator); 2]> {
    let exact = EmpiricalTransitionModel::from_mdp_exact(&inst.mdp);
    Ok([
        ("classic", BisimOperator::classic(&inst.mdp, &inst.pi, &OperatorConfig::classic(c_r, c_t))?),
        (
            "predictive",
            BisimOperator::predictive(&inst.pi, &inst.model, &exact, &OperatorConfig::predictive(c_r, c_t))?,
        ),
    ])
}

fn contraction(opts: &VerifyOptions, n_inst: usize) -> Result<SuiteReport> {
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for k in 0..n_inst {
        let seed = derive_seed(opts.master_seed, k);
        let inst = random_instance(seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0);
        let c_r = rng.gen_range(0.5..2.0);
        let c_t = rng.gen_range(0.0..0.95);
        let n = inst.mdp.n_states();
        for (name, op) in operators(&inst, c_r, c_t)? {
            let mut worst = f64::NEG_INFINITY;
            let mut max_ratio: f64 = 0.0;
            for _ in 0..CONTRACTION_PAIRS {
                let d = random_metric(&mut rng, n, 5.0);
                let e = random_metric(&mut rng, n, 5.0);
                let gap = op.apply(&d)?.sup_distance(&op.apply(&e)?);
                let base = d.sup_distance(&e);
                worst = worst.max(gap - c_t * base);
                if base > 0.0 {
                    max_ratio = max_ratio.max(gap / base);
                }
            }
            let r = InstanceResult::new(
                k,
                seed,
                name,
                worst,
                CONTRACTION_SLACK,
                format!("n={n} c_T={c_t:.6} max_ratio={max_ratio:.12}"),
            );
            if !r.pass {
                failures.push(replay(&inst, json!({"operator": name, "c_r": c_r, "c_t": c_t})));
            }
            results.push(r);
        }
    }
    Ok(SuiteReport { suite: Suite::Contraction, results, failures })
}

fn diameter(opts: &VerifyOptions, n_inst: usize) -> Result<SuiteReport> {
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for k in 0..n_inst {
        let seed = derive_seed(opts.master_seed, k);
        let inst = random_instance(seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD1);
        let c_r = rng.gen_range(0.5..2.0);
        let c_t = rng.gen_range(0.1..0.9);
        let n = inst.mdp.n_states();
        let op = BisimOperator::classic(&inst.mdp, &inst.pi, &OperatorConfig::classic(c_r, c_t))?;
        let from_zero = solve(&op, MetricMatrix::zeros(n), opts.tol, MAX_ITERS)?;
        let from_rand = solve(&op, random_metric(&mut rng, n, 10.0), opts.tol, MAX_ITERS)?;
        let agree = from_zero.metric.sup_distance(&from_rand.metric);
        let r_pi = policy_reward(&inst.mdp, &inst.pi)?;
        let spread = r_pi.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x)) - r_pi.iter().fold(f64::INFINITY, |m, x| m.min(*x));
        let bound = c_r / (1.0 - c_t) * spread;
        let diam = full_diameter(&from_zero.metric);
        let checks = [
            ("agreement", agree, 2.0 * opts.tol, format!("iterations={}", from_zero.iterations)),
            ("diameter_bound", diam - bound, DIAMETER_SLACK, format!("diam={diam:.12} bound={bound:.12}")),
        ];
        for (check, residual, limit, detail) in checks {
            let r = InstanceResult::new(k, seed, check, residual, limit, detail);
            if !r.pass {
                failures.push(replay(&inst, json!({"check": check, "c_r": c_r, "c_t": c_t, "tol": opts.tol})));
            }
            results.push(r);
        }
    }
    Ok(SuiteReport { suite: Suite::Diameter, results, failures })
}

fn value_bound(opts: &VerifyOptions, n_inst: usize) -> Result<SuiteReport> {
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for k in 0..n_inst {
        let seed = derive_seed(opts.master_seed, k);
        let inst = random_instance(seed)?;
        let gamma = inst.mdp.gamma();
        let n = inst.mdp.n_states();
        let exact = EmpiricalTransitionModel::from_mdp_exact(&inst.mdp);
        let op = BisimOperator::predictive(&inst.pi, &inst.model, &exact, &OperatorConfig::predictive(1.0, gamma))?;
        let d = solve(&op, MetricMatrix::zeros(n), opts.tol, MAX_ITERS)?.metric;
        let v = policy_evaluation_direct(&inst.mdp, &inst.pi)?;
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((v[i] - v[j]).abs() - d.get(i, j));
            }
        }
        let r = InstanceResult::new(k, seed, "value_gap", worst, VALUE_BOUND_SLACK, format!("n={n}"));
        if !r.pass {
            failures.push(replay(&inst, json!({"c_r": 1.0, "c_t": gamma, "tol": opts.tol})));
        }
        results.push(r);
    }
    Ok(SuiteReport { suite: Suite::ValueBound, results, failures })
}

fn invariance(opts: &VerifyOptions, n_inst: usize) -> Result<SuiteReport> {
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for k in 0..n_inst {
        let seed = derive_seed(opts.master_seed, k);
        let inst = random_instance(seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1A);
        let phi: Vec<f64> = (0..inst.mdp.n_states()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let eta = rng.gen_range(0.1..5.0);
        let rep = verify_policy_invariance(&inst.mdp, &phi, eta, opts.tol)?;
        let residual = if rep.argmax_agree() { rep.max_residual } else { f64::INFINITY };
        let r = InstanceResult::new(
            k,
            seed,
            "q_shift",
            residual,
            INVARIANCE_LIMIT,
            format!("eta={eta:.6} q_residual={:.3e} argmax_disagreements={}", rep.max_residual, rep.disagreements.len()),
        );
        if !r.pass {
            failures.push(replay(&inst, json!({"phi": phi, "eta": eta, "tol": opts.tol})));
        }
        results.push(r);
    }
    Ok(SuiteReport { suite: Suite::Invariance, results, failures })
}

/// `c_R / (1 - c_T) * (2 / sqrt(pi)) * sqrt(variance)`.
pub fn degeneracy_bound(c_r: f64, c_t: f64, variance: f64) -> f64 {
    c_r / (1.0 - c_t) * 2.0 / std::f64::consts::PI.sqrt() * variance.sqrt()
}

fn degeneracy(opts: &VerifyOptions) -> Result<SuiteReport> {
    let seed = derive_seed(opts.master_seed, 0);
    let mdp = reward_free_chain(CHAIN_STATES, 0.9)?;
    let pi = Policy::uniform(CHAIN_STATES, mdp.n_actions());
    let n = CHAIN_STATES;

    let classic = BisimOperator::classic(&mdp, &pi, &OperatorConfig::classic(CHAIN_C_R, CHAIN_C_T))?;
    let d_classic = solve(&classic, MetricMatrix::zeros(n), opts.tol, MAX_ITERS)?.metric;
    let diam_classic = full_diameter(&d_classic);

    let sd = CHAIN_VARIANCE.sqrt();
    let cells = (0..n).flat_map(|s| (0..mdp.n_actions()).map(move |a| ((s, a), (0.0, sd))));
    let model = GaussianRewardModel::from_cells(cells.collect::<Vec<_>>(), SIGMA_MIN, SIGMA_MAX)?;
    let exact = EmpiricalTransitionModel::from_mdp_exact(&mdp);
    let pred = BisimOperator::predictive(&pi, &model, &exact, &OperatorConfig::predictive(CHAIN_C_R, CHAIN_C_T))?;
    let d_pred = solve(&pred, MetricMatrix::zeros(n), opts.tol, MAX_ITERS)?.metric;
    let diam_pred = full_diameter(&d_pred);
    let bound = degeneracy_bound(CHAIN_C_R, CHAIN_C_T, CHAIN_VARIANCE);

    // E|N(0, 2 Sigma)| = 2 sqrt(Sigma) / sqrt(pi), the per-pair reward gap.
    let closed = 2.0 * sd / std::f64::consts::PI.sqrt();
    let mc = folded_normal_mc(0.0, 2.0 * CHAIN_VARIANCE, opts.mc_samples, seed);

    let results = vec![
        InstanceResult::new(0, seed, "classic_collapse", diam_classic, DEGENERATE_DIAMETER, format!("diam={diam_classic:.3e}")),
        InstanceResult::new(
            0,
            seed,
            "predictive_positive",
            NONDEGENERATE_DIAMETER - diam_pred,
            0.0,
            format!("diam={diam_pred:.12}"),
        ),
        InstanceResult::new(
            0,
            seed,
            "predictive_bound",
            diam_pred - bound,
            DEGENERACY_BOUND_SLACK,
            format!("diam={diam_pred:.12} bound={bound:.12}"),
        ),
        InstanceResult::new(
            0,
            seed,
            "bound_monte_carlo",
            (mc - closed).abs() / closed,
            MC_RELATIVE_TOL,
            format!("closed={closed:.9} mc={mc:.9} samples={}", opts.mc_samples),
        ),
    ];
    let failures = results
        .iter()
        .filter(|r| !r.pass)
        .map(|r| json!({"check": r.check, "mdp": mdp.to_text(), "variance": CHAIN_VARIANCE, "c_r": CHAIN_C_R, "c_t": CHAIN_C_T}))
        .collect();
    Ok(SuiteReport { suite: Suite::Degeneracy, results, failures })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn gradients(opts: &VerifyOptions, n_inst: usize) -> Result<SuiteReport> {
    let mut results = Vec::new();
    let mut failures = Vec::new();
    let n = 4;
    let k_dim = 3;
    let pairs = all_pairs(n);
    for k in 0..n_inst {
        let seed = derive_seed(opts.master_seed, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target = random_metric(&mut rng, n, 2.0);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..k_dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let z = EmbeddingTable::new(k_dim, rows.clone())?;
        let analytic = regression_gradient(&z, &target, &pairs);
        let numeric = finite_difference_gradient(
            |x| {
                let mut t = z.clone();
                t.as_mut_slice().copy_from_slice(x);
                regression_loss(&t, &target, &pairs)
            },
            z.as_slice(),
            FD_STEP,
        );
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let rel = max_abs(&diff) / max_abs(&numeric).max(1e-8);
        let r = InstanceResult::new(k, seed, "finite_difference", rel, GRADIENT_REL_TOL, format!("grad_norm={:.6e}", max_abs(&numeric)));
        if !r.pass {
            failures.push(json!({"z": rows, "target": target.as_array().outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>()}));
        }
        results.push(r);
    }
    let seed = derive_seed(opts.master_seed, n_inst);
    let target = MetricMatrix::from_pairs(2, |_, _| 2.0);
    let fit = fit_embedding(&target, EmbeddingOptions::new(1, 2000, 0.1, seed))?;
    let dist = fit.table.distance(0, 1);
    let r = InstanceResult::new(n_inst, seed, "two_state_fit", (dist - 2.0).abs(), TWO_STATE_TOL, format!("distance={dist:.9}"));
    if !r.pass {
        failures.push(json!({"two_state_seed": seed}));
    }
    results.push(r);
    Ok(SuiteReport { suite: Suite::Gradients, results, failures })
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.01..1.0) }).collect();
    if w.iter().all(|&x| x == 0.0) {
        w[0] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

fn dense(w: &[f64]) -> Result<DiscreteDistribution> {
    DiscreteDistribution::from_dense(w)
}

fn transport(opts: &VerifyOptions, n_inst: usize) -> Result<SuiteReport> {
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for k in 0..n_inst {
        let seed = derive_seed(opts.master_seed, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let a = random_weights(&mut rng, m);
        let b = random_weights(&mut rng, n);
        let c = Array2::from_shape_fn((m, n), |_| rng.gen_range(0.0..10.0));
        let solver = w1_discrete(&dense(&a)?, &dense(&b)?, &CostMatrix::new(c.clone())?)?;
        let brute = exhaustive_w1(&a, &b, &c)?;
        let r = InstanceResult::new(k, seed, "exhaustive", (solver - brute).abs(), TRANSPORT_TOL, format!("{m}x{n} w1={brute:.12}"));
        if !r.pass {
            failures.push(json!({"a": a, "b": b, "cost": c.outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>()}));
        }
        results.push(r);

        // Metric axioms over a shared pool of planar atoms.
        let pool = rng.gen_range(2..=6);
        let pts: Vec<[f64; 2]> = (0..pool).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let ground = CostMatrix::new(Array2::from_shape_fn((pool, pool), |(i, j)| {
            ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt()
        }))?;
        let (x, y, z) = (
            dense(&random_weights(&mut rng, pool))?,
            dense(&random_weights(&mut rng, pool))?,
            dense(&random_weights(&mut rng, pool))?,
        );
        let xy = w1_discrete(&x, &y, &ground)?;
        let yx = w1_discrete(&y, &x, &ground)?;
        let xx = w1_discrete(&x, &x, &ground)?;
        let xz = w1_discrete(&x, &z, &ground)?;
        let yz = w1_discrete(&y, &z, &ground)?;
        let axiom = (xy - yx).abs().max(xx.abs()).max(xz - xy - yz);
        let r = InstanceResult::new(k, seed, "metric_axioms", axiom, METRIC_AXIOM_TOL, format!("pool={pool}"));
        if !r.pass {
            failures.push(json!({"points": pts, "seed": seed}));
        }
        results.push(r);
    }
    Ok(SuiteReport { suite: Suite::Transport, results, failures })
}

fn discrepancy(opts: &VerifyOptions, n_inst: usize) -> Result<SuiteReport> {
    let mut results = Vec::new();
    let mut failures = Vec::new();
    let pi = Policy::uniform(2, 1);
    for k in 0..n_inst {
        let seed = derive_seed(opts.master_seed, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mu1, mu2) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let (s1, s2) = (rng.gen_range(0.05..SIGMA_MAX), rng.gen_range(0.05..SIGMA_MAX));
        let model = GaussianRewardModel::from_cells([((0, 0), (mu1, s1)), ((1, 0), (mu2, s2))], SIGMA_MIN, SIGMA_MAX)?;
        let closed = delta_r_predictive(&model, &pi, 0, 1, &OperatorConfig::predictive(1.0, 0.5))?;
        let mc = abs_difference_mc(mu1, s1, mu2, s2, opts.mc_samples, seed ^ 0xF0);
        let r = InstanceResult::new(
            k,
            seed,
            "closed_vs_mc",
            (closed - mc).abs(),
            DISCREPANCY_ABS_TOL,
            format!("closed={closed:.9} mc={mc:.9}"),
        );
        if !r.pass {
            failures.push(json!({"mu": [mu1, mu2], "sigma": [s1, s2], "samples": opts.mc_samples}));
        }
        results.push(r);
    }
    Ok(SuiteReport { suite: Suite::Discrepancy, results, failures })
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<SuiteReport> {
    let n = opts.instances.unwrap_or_else(|| suite.default_instances());
    match suite {
        Suite::Contraction => contraction(opts, n),
        Suite::Diameter => diameter(opts, n),
        Suite::ValueBound => value_bound(opts, n),
        Suite::Invariance => invariance(opts, n),
        Suite::Degeneracy => degeneracy(opts),
        Suite::Gradients => gradients(opts, n),
        Suite::Transport => transport(opts, n),
        Suite::Discrepancy => discrepancy(opts, n),
    }
}

/// One line per suite: `suite: passed/total PASS|FAIL`.
pub fn summary_lines(reports: &[SuiteReport]) -> String {
    reports
        .iter()
        .map(|r| {
            format!(
                "{:<12} {:>4}/{:<4} {}\n",
                r.suite.name(),
                r.n_passed(),
                r.results.len(),
                if r.passed() { "PASS" } else { "FAIL" }
            )
        })
        .collect()
}

/// `<suite>.csv` per suite and, when anything failed, `failures.json`
/// holding the replay data keyed by suite.
pub fn write_reports(reports: &[SuiteReport], config_hash: &str, dir: &std::path::Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    for r in reports {
        let path = dir.join(format!("{}.csv", r.suite.name()));
        write_file(&path, &r.to_csv(config_hash))?;
        out.push(path);
    }
    let failed: serde_json::Map<String, serde_json::Value> = reports
        .iter()
        .filter(|r| !r.failures.is_empty())
        .map(|r| (r.suite.name().to_string(), serde_json::Value::from(r.failures.clone())))
        .collect();
    if !failed.is_empty() {
        let path = dir.join("failures.json");
        let body = json!({"config": config_hash, "failures": failed});
        write_file(&path, &(serde_json::to_string_pretty(&body)? + "\n"))?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(instances: usize) -> VerifyOptions {
        VerifyOptions {
            instances: Some(instances),
            mc_samples: 400_000,
            ..VerifyOptions::default()
        }
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn small_runs_pass() {
        for suite in [Suite::Contraction, Suite::Diameter, Suite::ValueBound, Suite::Invariance, Suite::Gradients, Suite::Transport] {
            let rep = run_suite(suite, &quick(3)).unwrap();
            assert!(rep.passed(), "{suite}: {:?}", rep.results);
            assert!(rep.failures.is_empty());
        }
    }

    #[test]
    fn degeneracy_bound_value() {
        assert!((degeneracy_bound(1.0, 0.5, 0.25) - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
        let rep = run_suite(Suite::Degeneracy, &quick(1)).unwrap();
        assert!(rep.results[..3].iter().all(|r| r.pass), "{:?}", rep.results);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let rep = run_suite(Suite::Transport, &quick(2)).unwrap();
        let csv = rep.to_csv("abc");
        assert!(csv.starts_with("# teb verify suite=transport config=abc\ninstance,seed,check"));
        assert_eq!(csv.lines().count(), 2 + 4);
    }
}
