//! Potential-based shaping leaves the optimal policy unchanged: Q* of the
//! shaped MDP equals Q* - eta * phi, and greedy actions agree.
//!
//! `cargo run --example shaping_invariance`

use teb::envs::sparse_chain_mdp;
use teb::intrinsic::{greedy_sets, verify_policy_invariance};

fn main() -> teb::Result<()> {
    let mdp = sparse_chain_mdp(6, 1.0, 0.9)?;
    let phi = [3.0, -1.0, 0.5, 2.0, -4.0, 0.0];
    for eta in [0.1, 1.0, 10.0] {
        let rep = verify_policy_invariance(&mdp, &phi, eta, 1e-10)?;
        println!(
            "eta {eta:>4}: max |Q' - (Q - eta phi)| = {:.2e}, greedy actions agree: {}",
            rep.max_residual,
            rep.argmax_agree()
        );
    }
    let rep = verify_policy_invariance(&mdp, &phi, 1.0, 1e-10)?;
    println!("greedy sets {:?}", greedy_sets(&rep.q));
    Ok(())
}
