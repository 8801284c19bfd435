//! Run every oracle suite with a reduced instance count and print the
//! worst residual of each check.
//!
//! `cargo run --release --example verify_suites -- [instances]`

use teb::harness::verify::{run_suite, Suite, VerifyOptions};

fn main() -> teb::Result<()> {
    let instances = std::env::args().nth(1).and_then(|s| s.parse().ok());
    let opts = VerifyOptions {
        instances,
        ..VerifyOptions::default()
    };
    for suite in Suite::ALL {
        let rep = run_suite(suite, &opts)?;
        let mut checks: Vec<&str> = Vec::new();
        for r in &rep.results {
            if !checks.contains(&r.check.as_str()) {
                checks.push(&r.check);
            }
        }
        for check in checks {
            let limit = rep.results.iter().find(|r| r.check == check).map_or(0.0, |r| r.limit);
            println!("{:<12} {:<20} worst {:>+.3e}  limit {:.0e}", suite.name(), check, rep.max_residual(check), limit);
        }
        println!("{:<12} {}/{} passed", "", rep.n_passed(), rep.results.len());
    }
    Ok(())
}
