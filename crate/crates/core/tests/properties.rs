use ndarray::Array2;
use proptest::prelude::*;

use teb::bisim::{full_diameter, solve, BisimOperator, MetricMatrix, OperatorConfig};
use teb::envs::{builtin_layout, layout_names, maze_reset, maze_step, compass_actions, CoverageTracker};
use teb::harness::config::{ExperimentConfig, RunMode, MAX_SEED};
use teb::intrinsic::{discounted_bonus_sum, shaping_bonus};
use teb::mdp::{random_mdp, Policy, TabularMdp};
use teb::oracle::exhaustive_w1;
use teb::reward_model::{EmpiricalTransitionModel, GaussianRewardModel, SIGMA_MAX, SIGMA_MIN};
use teb::transport::{w1_discrete, CostMatrix, DiscreteDistribution};

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_map(|w| {
        let mut w = w;
        if w.iter().sum::<f64>() < 1e-6 {
            w[0] = 1.0;
        }
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn planar_points(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), n)
}

fn euclid(pts: &[(f64, f64)]) -> CostMatrix {
    let n = pts.len();
    CostMatrix::new(Array2::from_shape_fn((n, n), |(i, j)| {
        ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt()
    }))
    .unwrap()
}

fn dist(w: &[f64]) -> DiscreteDistribution {
    DiscreteDistribution::from_dense(w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn w1_is_a_metric_on_euclidean_ground_costs(
        pts in planar_points(5),
        a in simplex(5),
        b in simplex(5),
        c in simplex(5),
    ) {
        let cost = euclid(&pts);
        let (x, y, z) = (dist(&a), dist(&b), dist(&c));
        let xy = w1_discrete(&x, &y, &cost).unwrap();
        prop_assert!(xy >= 0.0);
        prop_assert!((xy - w1_discrete(&y, &x, &cost).unwrap()).abs() <= 1e-12);
        prop_assert!(w1_discrete(&x, &x, &cost).unwrap().abs() <= 1e-12);
        let xz = w1_discrete(&x, &z, &cost).unwrap();
        let yz = w1_discrete(&y, &z, &cost).unwrap();
        prop_assert!(xz <= xy + yz + 1e-12);
    }

    #[test]
    fn w1_matches_brute_force(
        a in simplex(3),
        b in simplex(4),
        c in prop::collection::vec(0.0f64..10.0, 12),
    ) {
        let cost = Array2::from_shape_vec((3, 4), c).unwrap();
        let solver = w1_discrete(&dist(&a), &dist(&b), &CostMatrix::new(cost.clone()).unwrap()).unwrap();
        prop_assert!((solver - exhaustive_w1(&a, &b, &cost).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn operators_contract(
        seed in 0u64..10_000,
        n in 2usize..7,
        m in 1usize..4,
        c_t in 0.0f64..0.99,
        d_vals in prop::collection::vec(0.0f64..3.0, 36),
        e_vals in prop::collection::vec(0.0f64..3.0, 36),
        sd in 0.05f64..1.0,
    ) {
        let mdp = random_mdp(seed, n, m, 0.4).unwrap();
        let pi = Policy::uniform(n, m);
        let d = MetricMatrix::from_pairs(n, |i, j| d_vals[i * 6 + j]);
        let e = MetricMatrix::from_pairs(n, |i, j| e_vals[i * 6 + j]);
        let model = GaussianRewardModel::unbiased_for(&mdp, |_, _| sd, SIGMA_MIN, SIGMA_MAX).unwrap();
        let exact = EmpiricalTransitionModel::from_mdp_exact(&mdp);
        let ops = [
            BisimOperator::classic(&mdp, &pi, &OperatorConfig::classic(1.0, c_t)).unwrap(),
            BisimOperator::predictive(&pi, &model, &exact, &OperatorConfig::predictive(1.0, c_t)).unwrap(),
        ];
        for op in ops {
            let gap = op.apply(&d).unwrap().sup_distance(&op.apply(&e).unwrap());
            prop_assert!(gap <= c_t * d.sup_distance(&e) + 1e-12);
        }
    }

    #[test]
    fn fixed_points_are_pseudometrics(seed in 0u64..10_000, n in 2usize..8) {
        let mdp = random_mdp(seed, n, 2, 0.3).unwrap();
        let pi = Policy::uniform(n, 2);
        let op = BisimOperator::classic(&mdp, &pi, &OperatorConfig::classic(1.0, 0.7)).unwrap();
        let d = solve(&op, MetricMatrix::zeros(n), 1e-10, 100_000).unwrap().metric;
        for i in 0..n {
            prop_assert_eq!(d.get(i, i), 0.0);
            for j in 0..n {
                prop_assert!(d.get(i, j) >= 0.0);
                prop_assert_eq!(d.get(i, j), d.get(j, i));
                for k in 0..n {
                    prop_assert!(d.get(i, k) <= d.get(i, j) + d.get(j, k) + 1e-9);
                }
            }
        }
        prop_assert!(full_diameter(&d).is_finite());
    }

    #[test]
    fn mdp_text_round_trips(seed in 0u64..10_000, n in 1usize..6, m in 1usize..4) {
        let mdp = random_mdp(seed, n, m, 0.5).unwrap();
        let back = TabularMdp::from_text(&mdp.to_text()).unwrap();
        prop_assert_eq!(back, mdp);
    }

    #[test]
    fn shaping_bonus_telescopes(phis in prop::collection::vec(-10.0f64..10.0, 2..30), gamma in 0.0f64..0.999) {
        let direct: f64 = phis
            .windows(2)
            .enumerate()
            .map(|(t, w)| gamma.powi(t as i32) * shaping_bonus(w[0], w[1], gamma))
            .sum();
        let closed = gamma.powi(phis.len() as i32 - 1) * phis[phis.len() - 1] - phis[0];
        prop_assert!((direct - closed).abs() <= 1e-9);
        prop_assert!((discounted_bonus_sum(&phis, gamma) - closed).abs() <= 1e-9);
    }

    #[test]
    fn coverage_is_monotone_and_bounded(
        layout in prop::sample::select(layout_names()),
        actions in prop::collection::vec(0usize..8, 1..400),
        seed in 0u64..1000,
    ) {
        use rand::SeedableRng;
        let spec = builtin_layout(layout).unwrap();
        let moves = compass_actions(spec.max_action());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut cov = CoverageTracker::new(&spec).unwrap();
        let mut state = maze_reset(&spec, &mut rng);
        cov.update(state.position);
        let mut last = cov.ratio();
        for a in actions {
            let (next, _, done) = maze_step(&spec, &state, moves[a]).unwrap();
            prop_assert!(spec.is_free(next.position));
            cov.update(next.position);
            let r = cov.ratio();
            prop_assert!(r >= last && r <= 1.0);
            last = r;
            state = if done { maze_reset(&spec, &mut rng) } else { next };
            cov.update(state.position);
        }
    }

    #[test]
    fn config_round_trips(
        seed in 0..=MAX_SEED,
        seeds in 1usize..50,
        steps in 1usize..1_000_000,
        eta in 0.0f64..10.0,
        layout in prop::sample::select(layout_names()),
        mode in prop::sample::select(vec![RunMode::Shaped, RunMode::Unshaped, RunMode::Paired]),
        tol in 1e-14f64..1e-3,
    ) {
        let mut cfg = ExperimentConfig::default();
        cfg.master_seed = seed;
        cfg.maze.seeds = seeds;
        cfg.maze.layout = layout.to_string();
        cfg.maze.mode = mode;
        cfg.agent.total_steps = steps;
        cfg.shaping.eta = eta;
        cfg.metric.tol = tol;
        prop_assert!(cfg.validate().is_ok());
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
    }
}
