//! Exact W1 between two distributions on a line, with the optimal plan and
//! its dual certificate, cross-checked against brute-force enumeration.
//!
//! `cargo run --example transport`

use ndarray::Array2;
use teb::oracle::exhaustive_w1;
use teb::transport::{solve_transport, CostMatrix, DiscreteDistribution};

fn main() -> teb::Result<()> {
    let a = [0.2, 0.3, 0.5];
    let b = [0.5, 0.3, 0.2];
    let cost = Array2::from_shape_fn((3, 3), |(i, j)| (i as f64 - j as f64).abs());
    let sol = solve_transport(
        &DiscreteDistribution::from_dense(&a)?,
        &DiscreteDistribution::from_dense(&b)?,
        &CostMatrix::new(cost.clone())?,
    )?;
    println!("W1 = {:.6}", sol.cost);
    for (i, j, mass) in &sol.plan {
        println!("  move {mass:.2} from {i} to {j}");
    }
    println!("dual objective   {:.6}", sol.dual_objective(&a, &b));
    println!("dual violation   {:.2e}", sol.dual_violation(|i, j| cost[[i, j]]));
    println!("brute force      {:.6}", exhaustive_w1(&a, &b, &cost)?);
    Ok(())
}
