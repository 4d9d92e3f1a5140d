use mibma_core::{
    da_iterate, enumerate_models, fit_with_sandwich, informative_sample, initial_state,
    model_posterior, run_mi_bma, run_mi_single_model, DesignInfo, MiConfig, ModelId, Priors,
    RngStream, Scenario, ScenarioConfig,
};

fn desk_sample(n: usize, with_missing: bool, seed: u64) -> mibma_core::Dataset {
    informative_sample(
        &ScenarioConfig::desk(Scenario::I),
        n,
        with_missing,
        &mut RngStream::new(seed, 0),
    )
    .unwrap()
}

fn small_config(m: usize) -> MiConfig {
    MiConfig {
        m,
        burn_in: 20,
        thin: 2,
        seed: 99,
        stream_id: 4,
    }
}

#[test]
fn singleton_candidate_set_is_single_model_imputation() {
    let data = desk_sample(150, true, 1);
    let tau = ModelId::new(1, 6, true).unwrap();
    let priors = Priors::diffuse(8);
    let cfg = small_config(5);
    let a = run_mi_bma(&data, &[tau], &priors, &DesignInfo::Poisson, &cfg).unwrap();
    let b = run_mi_single_model(&data, &tau, &priors, &DesignInfo::Poisson, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fixed_seed_reproduces_every_draw() {
    let data = desk_sample(150, true, 2);
    let models = enumerate_models(6, true).unwrap();
    let priors = Priors::diffuse(8);
    let cfg = small_config(3);
    let a = run_mi_bma(&data, &models, &priors, &DesignInfo::Poisson, &cfg).unwrap();
    let b = run_mi_bma(&data, &models, &priors, &DesignInfo::Poisson, &cfg).unwrap();
    assert_eq!(a, b);
    let c = run_mi_bma(
        &data,
        &models,
        &priors,
        &DesignInfo::Poisson,
        &MiConfig { seed: 100, ..cfg },
    )
    .unwrap();
    assert_ne!(a, c);
}

#[test]
fn observed_responses_survive_every_sweep() {
    let data = desk_sample(120, true, 3);
    let models = enumerate_models(6, true).unwrap();
    let priors = Priors::diffuse(8);
    let mut rng = RngStream::new(5, 0);
    let mut state = initial_state(&data, &models, &DesignInfo::Poisson, &mut rng).unwrap();
    for _ in 0..30 {
        state = da_iterate(
            &state,
            &data,
            &models,
            &priors,
            &DesignInfo::Poisson,
            &mut rng,
        )
        .unwrap();
        for i in 0..data.n() {
            if data.delta()[i] {
                assert_eq!(state.completed_y[i].to_bits(), data.y()[i].to_bits());
            }
        }
        let (_, restricted) = mibma_core::partition_indices(&state.current_kappa);
        assert!(restricted.iter().all(|&k| state.current_theta[k] == 0.0));
    }
}

#[test]
fn complete_data_sweep_keeps_responses_and_redraws_parameters() {
    let data = desk_sample(100, false, 4);
    let models = enumerate_models(6, true).unwrap();
    let priors = Priors::diffuse(8);
    let mut rng = RngStream::new(6, 0);
    let s0 = initial_state(&data, &models, &DesignInfo::Poisson, &mut rng).unwrap();
    let s1 = da_iterate(&s0, &data, &models, &priors, &DesignInfo::Poisson, &mut rng).unwrap();
    assert_eq!(s1.completed_y, data.y());
    assert_ne!(s1.current_theta, s0.current_theta);
    assert_eq!(s1.iteration, 1);
}

#[test]
fn complete_data_single_model_pools_to_the_direct_fit() {
    let data = desk_sample(200, false, 5);
    let tau = ModelId::new(1, 6, true).unwrap();
    let out = run_mi_single_model(
        &data,
        &tau,
        &Priors::diffuse(8),
        &DesignInfo::Poisson,
        &small_config(10),
    )
    .unwrap();
    let fit = fit_with_sandwich(&data, &tau, &DesignInfo::Poisson).unwrap();
    for k in 0..8 {
        let sd = (fit.v_hat[(k, k)] / 10.0).sqrt();
        assert!((out.pooled.theta_mi[k] - fit.theta_hat[k]).abs() <= 3.0 * sd + 1e-12);
    }
}

#[test]
fn model_draws_follow_the_posterior_without_missingness() {
    let data = desk_sample(150, false, 6);
    let models = enumerate_models(6, true).unwrap();
    let priors = Priors::diffuse(8);
    let cfg = MiConfig {
        m: 2000,
        burn_in: 0,
        thin: 1,
        seed: 17,
        stream_id: 0,
    };
    let out = run_mi_bma(&data, &models, &priors, &DesignInfo::Poisson, &cfg).unwrap();

    let full = ModelId::full(6, true).unwrap();
    let fit = fit_with_sandwich(&data, &full, &DesignInfo::Poisson).unwrap();
    let post = model_posterior(&fit, &models, &priors.param, &priors.model).unwrap();
    let tv: f64 = models
        .iter()
        .map(|m| {
            let freq = out.draws.iter().filter(|d| d.kappa == *m).count() as f64 / 2000.0;
            (freq - post.prob_of(m)).abs()
        })
        .sum::<f64>()
        / 2.0;
    assert!(tv <= 0.03, "total variation {tv}");
}

#[test]
fn restricted_block_vanishes_in_large_samples() {
    let data = desk_sample(20_000, true, 7);
    let models = enumerate_models(6, true).unwrap();
    let cfg = MiConfig {
        m: 100,
        seed: 8,
        ..MiConfig::default()
    };
    let out = run_mi_bma(
        &data,
        &models,
        &Priors::diffuse(8),
        &DesignInfo::Poisson,
        &cfg,
    )
    .unwrap();
    let v = &out.pooled.v_mi;
    let lead = [0, 1, 7].iter().map(|&k| v[(k, k)]).fold(0.0, f64::max);
    for r in 2..=6 {
        for c in 0..8 {
            assert!(v[(r, c)].abs() < 0.01 * lead, "({r},{c}) = {}", v[(r, c)]);
        }
    }
    let identity = v
        .sub(&out.pooled.w_bar.add(&out.pooled.b.scale(1.01)).unwrap())
        .unwrap();
    assert!(identity.max_abs() < 1e-10);
}

#[test]
fn constrained_refit_agrees_with_conditioning_the_unconstrained_fit() {
    let data = desk_sample(20_000, false, 9);
    let tau = ModelId::new(1, 6, true).unwrap();
    let full = ModelId::full(6, true).unwrap();
    let refit = fit_with_sandwich(&data, &tau, &DesignInfo::Poisson).unwrap();
    let unconstrained = fit_with_sandwich(&data, &full, &DesignInfo::Poisson).unwrap();
    let (active, restricted) = mibma_core::partition_indices(&tau);
    let zeros = vec![0.0; restricted.len()];
    let (mean, cov) =
        mibma_core::conditional_normal(&unconstrained.theta_hat, &unconstrained.v_hat, &restricted, &zeros)
            .unwrap();
    for (i, &k) in active.iter().enumerate() {
        let sd = refit.v_hat[(k, k)].sqrt();
        assert!((refit.theta_hat[k] - mean[i]).abs() < 0.25 * sd, "slot {k}");
        let ratio = refit.v_hat[(k, k)] / cov[(i, i)];
        assert!((ratio - 1.0).abs() < 0.1, "slot {k}: variance ratio {ratio}");
    }
}
