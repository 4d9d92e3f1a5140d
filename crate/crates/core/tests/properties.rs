use mibma_core::metrics::{aggregate_metrics, ArmResult, Method, ReplicationOutcome};
use mibma_core::{
    da_iterate, enumerate_models, fit_pseudo_mle, informative_sample, initial_state, log_sum_exp,
    model_posterior, mvn_sample, rubin_pool, DesignInfo, Matrix, ModelId, ModelPrior, ParamPrior,
    Priors, RngStream, Scenario, ScenarioConfig,
};
use proptest::prelude::*;

fn spd(dim: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, dim * (dim + 2)).prop_map(move |v| {
        let g = Matrix::from_vec(dim + 2, dim, v).unwrap();
        g.transpose()
            .matmul(&g)
            .unwrap()
            .add(&Matrix::identity(dim).scale(0.1))
            .unwrap()
    })
}

fn draw_set() -> impl Strategy<Value = Vec<(Vec<f64>, Matrix)>> {
    (1usize..4, 2usize..8).prop_flat_map(|(dim, m)| {
        prop::collection::vec((prop::collection::vec(-5.0f64..5.0, dim), spd(dim)), m)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pooled_variance_is_within_plus_inflated_between(draws in draw_set()) {
        let p = rubin_pool(&draws).unwrap();
        let m = draws.len() as f64;
        let rebuilt = p.w_bar.add(&p.b.scale(1.0 + 1.0 / m)).unwrap();
        prop_assert!(p.v_mi.sub(&rebuilt).unwrap().max_abs() < 1e-10);
        let eig = mibma_core::linalg::symmetric_eigenvalues(&p.b).unwrap();
        prop_assert!(eig.iter().all(|&e| e >= -1e-10));
    }

    #[test]
    fn pooling_ignores_draw_order(draws in draw_set(), rot in 0usize..8) {
        let mut shuffled = draws.clone();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        let a = rubin_pool(&draws).unwrap();
        let b = rubin_pool(&shuffled).unwrap();
        for (x, y) in a.theta_mi.iter().zip(&b.theta_mi) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!(a.v_mi.sub(&b.v_mi).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_commutes_with_shifts(v in prop::collection::vec(-700.0f64..700.0, 1..20), c in -500.0f64..500.0) {
        let base = log_sum_exp(&v).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let got = log_sum_exp(&shifted).unwrap();
        prop_assert!((got - (base + c)).abs() <= 1e-12 * base.abs().max(c.abs()).max(1.0) * 10.0);
    }

    #[test]
    fn restricted_slots_are_zero_padded(seed in 0u64..1000, mask in 0u32..64) {
        let cfg = ScenarioConfig::desk(Scenario::I);
        let data = informative_sample(&cfg, 60, false, &mut RngStream::new(seed, 0)).unwrap();
        let kappa = ModelId::new(mask, 6, true).unwrap();
        let fit = fit_pseudo_mle(&data, &kappa).unwrap();
        let (_, restricted) = mibma_core::partition_indices(&kappa);
        for &r in &restricted {
            prop_assert_eq!(fit.theta_hat[r], 0.0);
            for c in 0..kappa.dim() {
                prop_assert_eq!(fit.v_hat[(r, c)], 0.0);
                prop_assert_eq!(fit.v_hat[(c, r)], 0.0);
            }
        }
    }

    #[test]
    fn observed_values_are_preserved(seed in 0u64..1000) {
        let cfg = ScenarioConfig::desk(Scenario::II);
        let data = informative_sample(&cfg, 80, true, &mut RngStream::new(seed, 1)).unwrap();
        let models = enumerate_models(6, false).unwrap();
        let priors = Priors::diffuse(7);
        let mut rng = RngStream::new(seed, 2);
        if let Ok(mut state) = initial_state(&data, &models, &DesignInfo::Poisson, &mut rng) {
            for _ in 0..5 {
                match da_iterate(&state, &data, &models, &priors, &DesignInfo::Poisson, &mut rng) {
                    Ok(next) => state = next,
                    Err(_) => break,
                }
                for i in 0..data.n() {
                    if data.delta()[i] {
                        prop_assert_eq!(state.completed_y[i].to_bits(), data.y()[i].to_bits());
                    } else {
                        prop_assert!(state.completed_y[i] == 0.0 || state.completed_y[i] == 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn streams_replay_identically(seed in any::<u64>(), stream in any::<u64>()) {
        let sigma = Matrix::from_rows(&[[1.0, 0.3], [0.3, 0.5]]).unwrap();
        let mut a = RngStream::new(seed, stream);
        let mut b = RngStream::new(seed, stream);
        for _ in 0..10 {
            prop_assert_eq!(mvn_sample(&[0.0, 1.0], &sigma, &mut a).unwrap(), mvn_sample(&[0.0, 1.0], &sigma, &mut b).unwrap());
        }
        a.reset();
        let mut c = RngStream::new(seed, stream);
        prop_assert_eq!(a.uniform().to_bits(), c.uniform().to_bits());
    }

    #[test]
    fn posterior_sums_to_one(seed in 0u64..500) {
        let cfg = ScenarioConfig::desk(Scenario::I);
        let data = informative_sample(&cfg, 100, false, &mut RngStream::new(seed, 3)).unwrap();
        let full = ModelId::full(6, true).unwrap();
        let fit = mibma_core::fit_with_sandwich(&data, &full, &DesignInfo::Poisson).unwrap();
        let models = enumerate_models(6, true).unwrap();
        let dist = model_posterior(&fit, &models, &ParamPrior::diffuse(8), &ModelPrior::Uniform).unwrap();
        let total: f64 = dist.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(dist.probabilities().iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn metrics_respect_their_ranges(est in prop::collection::vec((-1.0f64..1.0, 0.01f64..1.0, any::<bool>()), 2..30)) {
        let cfg = ScenarioConfig::desk(Scenario::I);
        let outcomes: Vec<ReplicationOutcome> = est
            .iter()
            .enumerate()
            .map(|(r, &(e, se, sel))| ReplicationOutcome {
                replication: r as u64,
                sample_size: 10,
                arms: vec![(Method::MiBma, Ok(ArmResult {
                    method: Method::MiBma,
                    estimate: vec![-0.5 + e, 1.0 - e],
                    std_error: vec![se, se],
                    selected: vec![true, sel, false, false, false, false],
                }))],
                outputs: vec![],
            })
            .collect();
        let rows = aggregate_metrics(&cfg, &[Method::MiBma], &outcomes);
        let r = outcomes.len() as f64;
        for row in rows {
            for v in [row.cp, row.tpr, row.tnr] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(row.mse >= row.var * (r - 1.0) / r - 1e-12);
        }
    }
}
