//! `teb metric`: the bisimulation fixed point of a tabular MDP under a policy.

use std::fmt::Write as _;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand_distr::Normal;

use crate::agent::stream_rng;
use crate::bisim::{full_diameter, solve, BisimOperator, MetricMatrix, OperatorConfig, OperatorMode};
use crate::error::{Error, Result};
use crate::harness::config::MetricSection;
use crate::mdp::{Policy, TabularMdp};
use crate::reward_model::{fit_reward_model, fit_transition_model, GaussianRewardModel, TransitionRecord, SIGMA_MAX, SIGMA_MIN};

/// Below this diameter the metric is reported as collapsed.
pub const COLLAPSE_DIAMETER: f64 = 1e-9;

/// `uniform`, a comma-separated action per state (`0,1,1`), or a path to a
/// file with one row of action probabilities per state.
pub fn parse_policy(spec: &str, mdp: &TabularMdp) -> Result<Policy> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    if spec == "uniform" {
        return Ok(Policy::uniform(n, m));
    }
    let path = Path::new(spec);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rows: Vec<Vec<f64>> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| l.split_whitespace().map(|t| t.parse::<f64>().map_err(|_| Error::Input(format!("bad probability `{t}`")))).collect())
            .collect::<Result<_>>()?;
        if rows.len() != n || rows.iter().any(|r| r.len() != m) {
            return Err(Error::Input(format!("policy file must have {n} rows of {m} probabilities")));
        }
        return Policy::new(ndarray::Array2::from_shape_fn((n, m), |(s, a)| rows[s][a]));
    }
    let acts: Vec<usize> = spec
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| Error::Input(format!("bad policy `{spec}`: expected uniform, a file, or actions like 0,1,1"))))
        .collect::<Result<_>>()?;
    if acts.len() != n {
        return Err(Error::Input(format!("policy lists {} actions for {n} states", acts.len())));
    }
    Policy::deterministic(&acts, m)
}

/// Models fitted from `samples_per_cell` simulated transitions of every
/// `(s, a)`, with rewards perturbed by Gaussian noise of std `reward_noise`.
pub fn sampled_models(
    mdp: &TabularMdp,
    samples_per_cell: usize,
    reward_noise: f64,
    seed: u64,
) -> Result<(GaussianRewardModel, crate::reward_model::EmpiricalTransitionModel)> {
    if samples_per_cell == 0 {
        return Err(Error::Config("samples_per_cell must be at least 1".into()));
    }
    if !(reward_noise >= 0.0) {
        return Err(Error::Config(format!("reward_noise must be non-negative, got {reward_noise}")));
    }
    let mut rng = stream_rng(seed, 4);
    let noise = Normal::new(0.0, reward_noise.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let mut records = Vec::with_capacity(n * m * samples_per_cell);
    for s in 0..n {
        for a in 0..m {
            let next = WeightedIndex::new(mdp.transition_row(s, a).iter().copied()).map_err(|e| Error::Input(e.to_string()))?;
            for _ in 0..samples_per_cell {
                let r = mdp.reward()[[s, a]] + if reward_noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                records.push(TransitionRecord {
                    s,
                    a,
                    r,
                    s_next: next.sample(&mut rng),
                    done: false,
                });
            }
        }
    }
    let rewards: Vec<(usize, usize, f64)> = records.iter().map(|t| (t.s, t.a, t.r)).collect();
    let reward = fit_reward_model(&rewards, SIGMA_MIN, SIGMA_MAX)?;
    let transitions = fit_transition_model(n, &records, 0.0)?;
    Ok((reward, transitions))
}

#[derive(Debug, Clone)]
pub struct MetricReport {
    pub mode: OperatorMode,
    pub metric: MetricMatrix,
    pub diameter: f64,
    pub iterations: usize,
    pub iteration_bound: usize,
    /// Set when every state sits at distance zero.
    pub collapsed: bool,
    /// Fitted reward model, predictive mode only.
    pub model_dump: Option<String>,
}

impl MetricReport {
    pub fn render(&self, config_hash: &str) -> String {
        let mut out = format!("# teb metric mode={:?} config={config_hash}\n", self.mode).to_lowercase();
        let _ = writeln!(out, "# iterations {} (a-priori bound {})", self.iterations, self.iteration_bound);
        let _ = writeln!(out, "# diameter {:.12}", self.diameter);
        if self.collapsed {
            out.push_str("# warning: metric collapsed, all states at distance 0\n");
        }
        out.push_str(&self.metric.to_table());
        out
    }
}

pub fn compute_metric(mdp: &TabularMdp, pi: &Policy, cfg: &MetricSection, seed: u64) -> Result<MetricReport> {
    let n = mdp.n_states();
    let (op, model_dump) = match cfg.mode {
        OperatorMode::Classic => (BisimOperator::classic(mdp, pi, &OperatorConfig::classic(cfg.c_r, cfg.c_t))?, None),
        OperatorMode::Predictive => {
            let (reward, transitions) = sampled_models(mdp, cfg.samples_per_cell, cfg.reward_noise, seed)?;
            let op = BisimOperator::predictive(pi, &reward, &transitions, &OperatorConfig::predictive(cfg.c_r, cfg.c_t))?;
            (op, Some(reward.dump()))
        }
    };
    let fp = solve(&op, MetricMatrix::zeros(n), cfg.tol, cfg.max_iters)?;
    let diameter = full_diameter(&fp.metric);
    Ok(MetricReport {
        mode: cfg.mode,
        diameter,
        iterations: fp.iterations,
        iteration_bound: fp.iteration_bound,
        collapsed: n > 1 && diameter <= COLLAPSE_DIAMETER,
        metric: fp.metric,
        model_dump,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::chain::reward_free_chain;
    use crate::mdp::random_mdp;

    #[test]
    fn policy_specs() {
        let mdp = random_mdp(0, 3, 2, 0.0).unwrap();
        assert_eq!(parse_policy("uniform", &mdp).unwrap().prob(1, 1), 0.5);
        assert_eq!(parse_policy("0,1,1", &mdp).unwrap().prob(1, 1), 1.0);
        assert!(parse_policy("0,1", &mdp).is_err());
        assert!(parse_policy("0,7,1", &mdp).is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pi.txt");
        std::fs::write(&p, "0.25 0.75\n1 0\n0 1\n").unwrap();
        assert_eq!(parse_policy(p.to_str().unwrap(), &mdp).unwrap().prob(0, 1), 0.75);
    }

    #[test]
    fn reward_free_chain_collapses_classically_but_not_predictively() {
        let mdp = reward_free_chain(5, 0.9).unwrap();
        let pi = Policy::uniform(5, 2);
        let classic = compute_metric(&mdp, &pi, &MetricSection::default(), 0).unwrap();
        assert!(classic.collapsed);
        assert!(classic.render("h").contains("warning: metric collapsed"));
        let cfg = MetricSection {
            mode: OperatorMode::Predictive,
            reward_noise: 0.5,
            ..MetricSection::default()
        };
        let pred = compute_metric(&mdp, &pi, &cfg, 0).unwrap();
        assert!(!pred.collapsed && pred.diameter > 0.01);
        assert!(pred.model_dump.as_deref().unwrap().lines().count() > 10);
    }

    #[test]
    fn sampled_models_recover_exact_ones() {
        let mdp = random_mdp(3, 4, 2, 0.3).unwrap();
        let (reward, trans) = sampled_models(&mdp, 4000, 0.0, 1).unwrap();
        for s in 0..4 {
            for a in 0..2 {
                assert!((reward.predict(s, a).0 - mdp.reward()[[s, a]]).abs() < 1e-12);
                let q = trans.query(s, a);
                for t in 0..4 {
                    assert!((q.probs[t] - mdp.transition()[[s, a, t]]).abs() < 0.05);
                }
            }
        }
    }
}
