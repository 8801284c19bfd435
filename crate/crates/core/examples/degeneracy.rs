//! On a reward-free chain the classic metric collapses to zero while the
//! predictive metric keeps states apart, bounded by `c_R/(1-c_T) * 2 sqrt(S/pi)`.
//!
//! `cargo run --release --example degeneracy`

use teb::bisim::{full_diameter, solve, BisimOperator, MetricMatrix, OperatorConfig};
use teb::envs::reward_free_chain;
use teb::harness::verify::degeneracy_bound;
use teb::mdp::Policy;
use teb::oracle::folded_normal_mc;
use teb::reward_model::{EmpiricalTransitionModel, GaussianRewardModel, SIGMA_MAX};

fn main() -> teb::Result<()> {
    let n = 5;
    let mdp = reward_free_chain(n, 0.9)?;
    let pi = Policy::uniform(n, 2);
    let (c_r, c_t) = (1.0, 0.5);

    let classic = BisimOperator::classic(&mdp, &pi, &OperatorConfig::classic(c_r, c_t))?;
    let dc = solve(&classic, MetricMatrix::zeros(n), 1e-10, 1000)?.metric;
    println!("classic diameter: {:.3e}", full_diameter(&dc));

    let exact = EmpiricalTransitionModel::from_mdp_exact(&mdp);
    println!("variance  predictive diameter  bound");
    for variance in [0.01, 0.0625, 0.25, 1.0] {
        let cells: Vec<_> = (0..n).flat_map(|s| (0..2).map(move |a| ((s, a), (0.0, f64::sqrt(variance))))).collect();
        let model = GaussianRewardModel::from_cells(cells, 0.0, SIGMA_MAX)?;
        let op = BisimOperator::predictive(&pi, &model, &exact, &OperatorConfig::predictive(c_r, c_t))?;
        let d = solve(&op, MetricMatrix::zeros(n), 1e-10, 1000)?.metric;
        println!("{variance:>8}  {:>19.6}  {:.6}", full_diameter(&d), degeneracy_bound(c_r, c_t, variance));
    }
    let mc = folded_normal_mc(0.0, 0.5, 2_000_000, 0);
    println!("E|N(0, 0.5)|: closed form {:.6}, Monte Carlo {mc:.6}", 1.0 / std::f64::consts::PI.sqrt());
    Ok(())
}
