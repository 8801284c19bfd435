use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use teb::bisim::OperatorMode;
use teb::harness::config::{ExperimentConfig, Overrides, RunMode};
use teb::harness::{export, metric, run_maze, verify};
use teb::mdp::TabularMdp;
use teb::{Error, Result};

#[derive(Parser)]
#[command(name = "teb", version, about = "Bisimulation metrics and metric-shaped maze exploration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of seeds (maze runs) or instances per suite (verify).
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Environment steps per maze run.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Shaping strength.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Built-in layout name or grid file.
    #[arg(long, global = true)]
    layout: Option<String>,
    /// TOML config; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Fixed-point tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// run-maze: shaped, unshaped, paired. metric: classic, predictive.
    #[arg(long, global = true)]
    mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the oracle suites and write one CSV per suite.
    Verify {
        /// Restrict to these suites (default: all).
        #[arg(long = "suite")]
        suites: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Train shaped and/or unshaped agents on a maze.
    RunMaze {
        #[command(flatten)]
        common: Common,
    },
    /// Bisimulation metric of an MDP file under a policy.
    Metric {
        mdp: PathBuf,
        /// `uniform`, actions like `0,1,1`, or a probability file.
        #[arg(long, default_value = "uniform")]
        policy: String,
        #[command(flatten)]
        common: Common,
    },
    /// List built-in layouts, or write them as grid files with --out-dir.
    Layouts {
        #[command(flatten)]
        common: Common,
    },
    /// Write MDP fixtures and a default config.
    Export {
        #[command(flatten)]
        common: Common,
    },
}

fn config(c: &Common) -> Result<ExperimentConfig> {
    let overrides = Overrides {
        seed: c.seed,
        seeds: c.seeds,
        steps: c.steps,
        eta: c.eta,
        layout: c.layout.clone(),
        out_dir: c.out_dir.clone(),
        tol: c.tol,
    };
    ExperimentConfig::resolve(c.config.as_deref(), &overrides)
}

fn list(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Verify { suites, common } => {
            let cfg = config(&common)?;
            let suites = if suites.is_empty() {
                verify::Suite::ALL.to_vec()
            } else {
                suites.iter().map(|s| s.parse()).collect::<Result<_>>()?
            };
            let opts = verify::VerifyOptions {
                master_seed: cfg.master_seed,
                instances: cfg.verify.seeds,
                tol: cfg.verify.tol.unwrap_or(verify::DEFAULT_TOL),
                mc_samples: cfg.verify.mc_samples.unwrap_or(verify::DEFAULT_MC_SAMPLES),
            };
            let reports = suites.into_iter().map(|s| verify::run_suite(s, &opts)).collect::<Result<Vec<_>>>()?;
            print!("{}", verify::summary_lines(&reports));
            list(&verify::write_reports(&reports, &cfg.hash()?, &cfg.out_dir.join("verify"))?);
            Ok(reports.iter().all(|r| r.passed()))
        }
        Command::RunMaze { common } => {
            let mut cfg = config(&common)?;
            if let Some(m) = &common.mode {
                cfg.maze.mode = m.parse::<RunMode>()?;
            }
            let report = run_maze::run_maze(&cfg)?;
            let dir = cfg.out_dir.join("maze").join(&report.spec.name);
            list(&run_maze::write_outputs(&report, &cfg, &dir)?);
            for &v in run_maze::Variant::for_mode(cfg.maze.mode) {
                let sm = report.summary(v);
                println!("{:<9} median {:.4} mean {:.4} std {:.4} failures {}", v.name(), sm.median, sm.mean, sm.std, sm.failures.len());
            }
            if cfg.maze.mode == RunMode::Paired {
                println!("median gain {:+.1}%, shaped wins {}/{}", 100.0 * report.median_gain(), report.shaped_wins(), report.pairs().len());
            }
            Ok(report.runs.iter().all(|r| r.outcome.is_ok()))
        }
        Command::Metric { mdp, policy, common } => {
            let mut cfg = config(&common)?;
            cfg.metric.mode = match common.mode.as_deref() {
                None => cfg.metric.mode,
                Some("classic") => OperatorMode::Classic,
                Some("predictive") => OperatorMode::Predictive,
                Some(other) => return Err(Error::Config(format!("unknown metric mode `{other}` (classic, predictive)"))),
            };
            let text = std::fs::read_to_string(&mdp).map_err(|e| Error::Input(format!("{}: {e}", mdp.display())))?;
            let m = TabularMdp::from_text(&text)?;
            let pi = metric::parse_policy(&policy, &m)?;
            let report = metric::compute_metric(&m, &pi, &cfg.metric, cfg.master_seed)?;
            let rendered = report.render(&cfg.hash()?);
            print!("{rendered}");
            if common.out_dir.is_some() || common.config.is_some() {
                let stem = mdp.file_stem().and_then(|s| s.to_str()).unwrap_or("mdp");
                let dir = cfg.out_dir.join("metric");
                std::fs::create_dir_all(&dir).map_err(|e| Error::Input(format!("{}: {e}", dir.display())))?;
                let table = dir.join(format!("{stem}.txt"));
                std::fs::write(&table, &rendered).map_err(|e| Error::Input(format!("{}: {e}", table.display())))?;
                println!("wrote {}", table.display());
                if let Some(dump) = &report.model_dump {
                    let path = dir.join(format!("{stem}_reward_model.txt"));
                    std::fs::write(&path, dump).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
                    println!("wrote {}", path.display());
                }
            }
            if report.collapsed {
                eprintln!("warning: metric collapsed to zero; the classic operator cannot separate states with equal expected rewards");
            }
            Ok(true)
        }
        Command::Layouts { common } => {
            match &common.out_dir {
                Some(dir) => list(&export::write_layouts(dir)?),
                None => {
                    for spec in teb::envs::all_layouts() {
                        println!("{} ({}x{} tiles, coverage cell {})", spec.name, spec.cols(), spec.rows(), spec.cell_size);
                        print!("{}", spec.to_grid());
                    }
                }
            }
            Ok(true)
        }
        Command::Export { common } => {
            let cfg = config(&common)?;
            list(&export::export_fixtures(&cfg.out_dir, cfg.master_seed)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
