//! Classic and predictive bisimulation fixed points on a random MDP, and
//! the value-difference bound `|V(i) - V(j)| <= d(i, j)`.
//!
//! `cargo run --example bisim_metric -- [seed]`

use teb::bisim::{full_diameter, solve, BisimOperator, MetricMatrix, OperatorConfig};
use teb::mdp::{policy_evaluation_direct, random_mdp, Policy};
use teb::reward_model::{EmpiricalTransitionModel, GaussianRewardModel, SIGMA_MAX, SIGMA_MIN};

fn main() -> teb::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let mdp = random_mdp(seed, 5, 2, 0.3)?;
    let pi = Policy::uniform(5, 2);
    let gamma = mdp.gamma();

    let classic = BisimOperator::classic(&mdp, &pi, &OperatorConfig::classic(1.0, gamma))?;
    let fp = solve(&classic, MetricMatrix::zeros(5), 1e-10, 100_000)?;
    println!("classic: {} iterations (a-priori bound {})", fp.iterations, fp.iteration_bound);
    print!("{}", fp.metric.to_table());

    let model = GaussianRewardModel::unbiased_for(&mdp, |_, _| 0.3, SIGMA_MIN, SIGMA_MAX)?;
    let exact = EmpiricalTransitionModel::from_mdp_exact(&mdp);
    let pred = BisimOperator::predictive(&pi, &model, &exact, &OperatorConfig::predictive(1.0, gamma))?;
    let dp = solve(&pred, MetricMatrix::zeros(5), 1e-10, 100_000)?.metric;
    println!("predictive (reward std 0.3):");
    print!("{}", dp.to_table());
    println!("diameters: classic {:.4}, predictive {:.4}", full_diameter(&fp.metric), full_diameter(&dp));

    let v = policy_evaluation_direct(&mdp, &pi)?;
    let mut slack = f64::INFINITY;
    for i in 0..5 {
        for j in i + 1..5 {
            slack = slack.min(dp.get(i, j) - (v[i] - v[j]).abs());
        }
    }
    println!("min over pairs of d(i,j) - |V(i)-V(j)| = {slack:.4} (non-negative)");
    Ok(())
}
