//! Regress a 2-d embedding onto a bisimulation metric and report how well
//! Euclidean distances reproduce it.
//!
//! `cargo run --release --example embedding`

use teb::bisim::{solve, BisimOperator, MetricMatrix, OperatorConfig};
use teb::embedding::{fit_embedding, EmbeddingOptions};
use teb::envs::sparse_chain_mdp;
use teb::mdp::Policy;

fn main() -> teb::Result<()> {
    let n = 6;
    let mdp = sparse_chain_mdp(n, 1.0, 0.9)?;
    let pi = Policy::uniform(n, 2);
    let op = BisimOperator::classic(&mdp, &pi, &OperatorConfig::classic(1.0, 0.9))?;
    let target = solve(&op, MetricMatrix::zeros(n), 1e-10, 100_000)?.metric;

    let fit = fit_embedding(&target, EmbeddingOptions::new(2, 3000, 0.05, 0))?;
    for (step, loss) in &fit.checkpoints {
        println!("step {step:>5}  loss {loss:.6}");
    }
    println!("state  embedding");
    for s in 0..n {
        let z = fit.table.row(s);
        println!("{s:>5}  ({:+.3}, {:+.3})", z[0], z[1]);
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((fit.table.distance(i, j) - target.get(i, j)).abs());
        }
    }
    println!("max |distance - metric| = {worst:.4}");
    Ok(())
}
