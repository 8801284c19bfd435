//! Fit the per-cell Gaussian reward model to noisy samples and compare its
//! negative log-likelihood with the true generating parameters.
//!
//! `cargo run --example reward_model`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use teb::reward_model::{fit_reward_model, GaussianRewardModel, SIGMA_MAX, SIGMA_MIN};

fn main() -> teb::Result<()> {
    let truth = [((0, 0), (1.0, 0.1)), ((0, 1), (-0.5, 0.5)), ((1, 0), (0.0, 2.0))];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut data = Vec::new();
    for &((s, a), (mu, sd)) in &truth {
        let normal = Normal::new(mu, sd).expect("valid");
        data.extend((0..5000).map(|_| (s, a, normal.sample(&mut rng))));
    }
    let model = fit_reward_model(&data, SIGMA_MIN, SIGMA_MAX)?;
    print!("{}", model.dump());
    println!("cell    true (mu, sd)   nll(true)  nll(fit)");
    for &((s, a), (mu, sd)) in &truth {
        let targets: Vec<f64> = data.iter().filter(|d| (d.0, d.1) == (s, a)).map(|d| d.2).collect();
        let (m, f) = model.predict(s, a);
        println!(
            "({s},{a})  ({mu:+.1}, {sd:.1})     {:>8.4}  {:>8.4}",
            GaussianRewardModel::nll(&targets, mu, sd),
            GaussianRewardModel::nll(&targets, m, f)
        );
    }
    println!("cell (1,0) std is clipped to {SIGMA_MAX}; unseen cells fall back to {:?}", model.prior());
    Ok(())
}
