//! Shaped vs. unshaped coverage on one layout.
//!
//! `cargo run --release --example maze_coverage -- bottleneck 3 100000`

use std::time::Instant;

use teb::agent::{train, AgentConfig};
use teb::envs::builtin_layout;
use teb::intrinsic::ShapingConfig;

fn main() -> teb::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let layout = args.get(1).map_or("bottleneck", String::as_str);
    let seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let steps: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let spec = builtin_layout(layout)?;
    let shaping = ShapingConfig::new(1.0, 0.99);
    println!("layout {layout}, {steps} steps");
    println!("seed  unshaped  shaped");
    for seed in 0..seeds {
        let cfg = AgentConfig { total_steps: steps, seed, ..AgentConfig::default() };
        let t = Instant::now();
        let plain = train(&spec, &cfg, None)?;
        let shaped = train(&spec, &cfg, Some(&shaping))?;
        println!(
            "{seed:>4}  {:>8.3}  {:>6.3}   ({:.1}s)",
            plain.final_coverage,
            shaped.final_coverage,
            t.elapsed().as_secs_f64()
        );
        if seed == 0 {
            println!("{}", shaped.coverage.snapshot(&spec));
        }
    }
    Ok(())
}
