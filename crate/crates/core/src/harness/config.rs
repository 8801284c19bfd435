use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{stream_rng, AgentConfig};
use crate::bisim::OperatorMode;
use crate::envs::layouts::{builtin_layout, LAYOUT_CELL};
use crate::envs::maze::MazeSpec;
use crate::error::{Error, Result};
use crate::intrinsic::{AnchorPolicy, ShapingConfig};

/// Coverage cell for grid files that declare none.
pub const DEFAULT_FILE_CELL: f64 = 0.05;

/// Largest seed a TOML config can hold.
pub const MAX_SEED: u64 = i64::MAX as u64;

/// Which agents `run-maze` trains per seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Shaped,
    Unshaped,
    Paired,
}

impl std::str::FromStr for RunMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shaped" => Ok(Self::Shaped),
            "unshaped" => Ok(Self::Unshaped),
            "paired" => Ok(Self::Paired),
            other => Err(Error::Config(format!("unknown run mode `{other}` (shaped, unshaped, paired)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MazeSection {
    /// Built-in layout name or a path to a grid file.
    pub layout: String,
    /// Coverage cell for grid files; built-ins carry their own.
    pub cell_size: Option<f64>,
    pub seeds: usize,
    pub mode: RunMode,
    /// Also write the per-step bonus trace of shaped runs.
    pub write_trace: bool,
}

impl Default for MazeSection {
    fn default() -> Self {
        Self {
            layout: "bottleneck".into(),
            cell_size: None,
            seeds: 10,
            mode: RunMode::Paired,
            write_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapingSection {
    pub eta: f64,
    pub c_r: f64,
    /// `None` uses the agent's discount.
    pub c_t: Option<f64>,
    pub anchor_policy: AnchorPolicy,
}

impl Default for ShapingSection {
    fn default() -> Self {
        Self {
            eta: 1.0,
            c_r: 1.0,
            c_t: None,
            anchor_policy: AnchorPolicy::BatchMean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSection {
    pub mode: OperatorMode,
    pub c_r: f64,
    pub c_t: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Std of Gaussian noise added to sampled rewards in predictive mode.
    pub reward_noise: f64,
    /// Samples drawn per `(s, a)` to fit the predictive models.
    pub samples_per_cell: usize,
}

impl Default for MetricSection {
    fn default() -> Self {
        Self {
            mode: OperatorMode::Classic,
            c_r: 1.0,
            c_t: 0.5,
            tol: 1e-10,
            max_iters: 100_000,
            reward_noise: 0.0,
            samples_per_cell: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Instances per suite; `None` uses each suite's default.
    pub seeds: Option<usize>,
    /// Fixed-point and value-iteration tolerance; `None` uses 1e-10.
    pub tol: Option<f64>,
    /// Monte Carlo draws for sampling cross-checks.
    pub mc_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub out_dir: PathBuf,
    pub maze: MazeSection,
    pub agent: AgentConfig,
    pub shaping: ShapingSection,
    pub metric: MetricSection,
    pub verify: VerifySection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            out_dir: PathBuf::from("out"),
            maze: MazeSection::default(),
            agent: AgentConfig::default(),
            shaping: ShapingSection::default(),
            metric: MetricSection::default(),
            verify: VerifySection::default(),
        }
    }
}

/// Command-line values that replace config entries when present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub seeds: Option<usize>,
    pub steps: Option<usize>,
    pub eta: Option<f64>,
    pub layout: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub tol: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Loads `path` if given, else defaults, then applies `overrides`.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.master_seed = v;
        }
        if let Some(v) = o.seeds {
            self.maze.seeds = v;
            self.verify.seeds = Some(v);
        }
        if let Some(v) = o.steps {
            self.agent.total_steps = v;
        }
        if let Some(v) = o.eta {
            self.shaping.eta = v;
        }
        if let Some(v) = &o.layout {
            self.maze.layout = v.clone();
        }
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
        if let Some(v) = o.tol {
            self.metric.tol = v;
            self.verify.tol = Some(v);
        }
    }

    /// TOML without `out_dir`, so outputs do not depend on where they go.
    pub fn canonical_toml(&self) -> Result<String> {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.to_toml()
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical_toml`].
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.canonical_toml()?.as_bytes());
        Ok(hex::encode(&digest[..8]))
    }

    pub fn shaping_config(&self) -> ShapingConfig {
        ShapingConfig {
            eta: self.shaping.eta,
            gamma: self.agent.gamma,
            c_r: self.shaping.c_r,
            c_t: self.shaping.c_t.unwrap_or(self.agent.gamma),
            anchor_policy: self.shaping.anchor_policy,
        }
    }

    pub fn layout(&self) -> Result<MazeSpec> {
        if let Ok(spec) = builtin_layout(&self.maze.layout) {
            return Ok(spec);
        }
        let path = Path::new(&self.maze.layout);
        if !path.exists() {
            return builtin_layout(&self.maze.layout);
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("layout");
        let declared = text.lines().find_map(|l| l.strip_prefix("; cell_size").and_then(|v| v.trim().parse::<f64>().ok()));
        let cell = self.maze.cell_size.or(declared).unwrap_or(DEFAULT_FILE_CELL);
        MazeSpec::parse(name, &text, LAYOUT_CELL, cell)
    }

    /// Per-run seeds derived from `(master_seed, index)`.
    pub fn run_seeds(&self) -> Result<Vec<u64>> {
        let seeds: Vec<u64> = (0..self.maze.seeds).map(|i| derive_seed(self.master_seed, i)).collect();
        let distinct: BTreeSet<u64> = seeds.iter().copied().collect();
        if distinct.len() != seeds.len() {
            return Err(Error::Config("derived seeds collide".into()));
        }
        Ok(seeds)
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.shaping_config().validate()?;
        for (what, seed) in [("master_seed", self.master_seed), ("agent.seed", self.agent.seed)] {
            if seed > MAX_SEED {
                return Err(Error::Config(format!("{what} {seed} exceeds {MAX_SEED}; config files store signed 64-bit integers")));
            }
        }
        if self.maze.seeds == 0 {
            return Err(Error::Config("need at least one seed".into()));
        }
        self.layout()?;
        Ok(())
    }
}

/// Seed for job `index` under `master`, independent of scheduling.
pub fn derive_seed(master: u64, index: usize) -> u64 {
    stream_rng(master, 1 << 32 | index as u64).next_u64()
}
