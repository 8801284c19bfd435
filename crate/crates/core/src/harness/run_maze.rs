//! Paired shaped/unshaped maze runs and their output files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::agent::{train, AgentConfig, RunResult};
use crate::envs::maze::MazeSpec;
use crate::error::Result;
use crate::harness::write_file;
use crate::harness::config::{ExperimentConfig, RunMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Unshaped,
    Shaped,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Unshaped => "unshaped",
            Variant::Shaped => "shaped",
        }
    }

    pub fn for_mode(mode: RunMode) -> &'static [Variant] {
        match mode {
            RunMode::Shaped => &[Variant::Shaped],
            RunMode::Unshaped => &[Variant::Unshaped],
            RunMode::Paired => &[Variant::Unshaped, Variant::Shaped],
        }
    }
}

#[derive(Debug)]
pub struct MazeRun {
    pub variant: Variant,
    pub index: usize,
    pub seed: u64,
    /// A run that aborted (e.g. Q divergence) keeps its error here.
    pub outcome: std::result::Result<RunResult, String>,
}

impl MazeRun {
    pub fn final_coverage(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.final_coverage)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub runs: usize,
    pub final_coverage: Vec<Option<f64>>,
    pub median: f64,
    pub mean: f64,
    pub std: f64,
    pub failures: Vec<String>,
}

#[derive(Debug)]
pub struct MazeReport {
    pub spec: MazeSpec,
    pub config_hash: String,
    pub runs: Vec<MazeRun>,
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl MazeReport {
    pub fn runs_of(&self, variant: Variant) -> impl Iterator<Item = &MazeRun> {
        self.runs.iter().filter(move |r| r.variant == variant)
    }

    pub fn summary(&self, variant: Variant) -> VariantSummary {
        let finals: Vec<Option<f64>> = self.runs_of(variant).map(MazeRun::final_coverage).collect();
        let ok: Vec<f64> = finals.iter().flatten().copied().collect();
        let (mean, std) = mean_std(&ok);
        VariantSummary {
            variant,
            runs: finals.len(),
            median: median(&ok),
            mean,
            std,
            failures: self
                .runs_of(variant)
                .filter_map(|r| r.outcome.as_ref().err().map(|e| format!("seed {}: {e}", r.seed)))
                .collect(),
            final_coverage: finals,
        }
    }

    /// `(seed, unshaped, shaped)` for every seed where both runs finished.
    pub fn pairs(&self) -> Vec<(u64, f64, f64)> {
        self.runs_of(Variant::Unshaped)
            .filter_map(|u| {
                let s = self.runs_of(Variant::Shaped).find(|s| s.index == u.index)?;
                Some((u.seed, u.final_coverage()?, s.final_coverage()?))
            })
            .collect()
    }

    /// Relative gain of the shaped median over the unshaped median.
    pub fn median_gain(&self) -> f64 {
        let u = self.summary(Variant::Unshaped).median;
        let s = self.summary(Variant::Shaped).median;
        (s - u) / u
    }

    pub fn shaped_wins(&self) -> usize {
        self.pairs().iter().filter(|(_, u, s)| s > u).count()
    }

    pub fn curve_csv(&self, run: &MazeRun) -> Option<String> {
        let r = run.outcome.as_ref().ok()?;
        let mut out = format!(
            "# teb run-maze layout={} variant={} seed={} config={}\nstep,coverage,mean_bonus,mean_q\n",
            self.spec.name,
            run.variant.name(),
            run.seed,
            self.config_hash
        );
        for p in &r.curve {
            let _ = writeln!(out, "{},{:.6},{:.9e},{:.9e}", p.step, p.coverage, p.mean_bonus, p.mean_q);
        }
        Some(out)
    }

    pub fn comparison_csv(&self) -> String {
        let mut out = format!("# teb run-maze layout={} config={}\nseed,unshaped,shaped,gain\n", self.spec.name, self.config_hash);
        for (seed, u, s) in self.pairs() {
            let _ = writeln!(out, "{seed},{u:.6},{s:.6},{:.6}", s - u);
        }
        out
    }

    pub fn summary_json(&self, variants: &[Variant]) -> serde_json::Value {
        let mut v = json!({
            "layout": self.spec.name,
            "config": self.config_hash,
            "variants": variants.iter().map(|&x| self.summary(x)).collect::<Vec<_>>(),
        });
        if variants.len() == 2 {
            v["median_gain"] = json!(self.median_gain());
            v["shaped_wins"] = json!(self.shaped_wins());
            v["pairs"] = json!(self.pairs().len());
        }
        v
    }
}

fn run_one(spec: &MazeSpec, cfg: &ExperimentConfig, variant: Variant, index: usize, seed: u64) -> MazeRun {
    let agent = AgentConfig { seed, ..cfg.agent.clone() };
    let shaping = cfg.shaping_config();
    let outcome = match variant {
        Variant::Unshaped => train(spec, &agent, None),
        Variant::Shaped => train(spec, &agent, Some(&shaping)),
    };
    MazeRun {
        variant,
        index,
        seed,
        outcome: outcome.map_err(|e| e.to_string()),
    }
}

/// Trains every (variant, seed) job in parallel. Results are ordered by
/// variant then seed index, independent of scheduling.
pub fn run_maze(cfg: &ExperimentConfig) -> Result<MazeReport> {
    cfg.validate()?;
    let spec = cfg.layout()?;
    let seeds = cfg.run_seeds()?;
    let jobs: Vec<(Variant, usize, u64)> = Variant::for_mode(cfg.maze.mode)
        .iter()
        .flat_map(|&v| seeds.iter().enumerate().map(move |(i, &s)| (v, i, s)))
        .collect();
    let runs = jobs.par_iter().map(|&(v, i, s)| run_one(&spec, cfg, v, i, s)).collect();
    Ok(MazeReport {
        spec,
        config_hash: cfg.hash()?,
        runs,
    })
}

/// Writes curves, coverage snapshots, the summary and (for paired runs)
/// the per-seed comparison under `dir`. Returns the written paths.
pub fn write_outputs(report: &MazeReport, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |name: String, contents: String| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    for run in &report.runs {
        let tag = format!("{}_seed{:02}", run.variant.name(), run.index);
        if let Some(csv) = report.curve_csv(run) {
            put(format!("{tag}_curve.csv"), csv)?;
        }
        if let Ok(r) = &run.outcome {
            put(format!("{tag}_coverage.txt"), r.coverage.snapshot(&report.spec))?;
            if cfg.maze.write_trace && run.variant == Variant::Shaped {
                let mut trace = String::from("step,phase,r,phi,phi_next,bonus,shaped,done\n");
                for b in &r.bonus_trace {
                    let _ = writeln!(
                        trace,
                        "{},{},{},{:.9e},{:.9e},{:.9e},{:.9e},{}",
                        b.step, b.phase, b.r, b.phi, b.phi_next, b.bonus, b.shaped, b.done
                    );
                }
                put(format!("{tag}_bonus.csv"), trace)?;
            }
        }
    }
    let variants = Variant::for_mode(cfg.maze.mode);
    put("summary.json".into(), serde_json::to_string_pretty(&report.summary_json(variants))? + "\n")?;
    if cfg.maze.mode == RunMode::Paired {
        put("comparison.csv".into(), report.comparison_csv())?;
    }
    put("config.toml".into(), cfg.canonical_toml()?)?;
    Ok(written)
}
