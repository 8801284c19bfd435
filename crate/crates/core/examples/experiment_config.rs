//! Drive a paired maze experiment from a TOML config string, as
//! `teb run-maze --config` does, and print the summary JSON.
//!
//! `cargo run --release --example experiment_config`

use teb::harness::config::ExperimentConfig;
use teb::harness::run_maze::{run_maze, Variant};

const CONFIG: &str = r#"
master_seed = 1

[maze]
layout = "tree"
seeds = 3
mode = "paired"

[agent]
total_steps = 30000

[shaping]
eta = 1.0
"#;

fn main() -> teb::Result<()> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    println!("config hash {}", cfg.hash()?);
    let report = run_maze(&cfg)?;
    let summary = report.summary_json(&[Variant::Unshaped, Variant::Shaped]);
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
