//! Data-augmentation multiple imputation with the model drawn alongside the
//! parameters, followed by constrained analysis refits and Rubin pooling.
//!
//! One DA sweep on the current completed data:
//! 1. fit the unconstrained model, score every candidate through its
//!    sampling distribution and draw `κ*`;
//! 2. refit under `κ*` and draw `θ* ~ N(θ̂_κ*, V̂(θ̂_κ*))`;
//! 3. redraw each missing response from `f(y | x; θ*)`.
//!
//! With a single candidate the model step is skipped, which gives classical
//! single-model multiple imputation.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::data::{Dataset, Family};
use crate::design::{fit_with_sandwich, DesignInfo};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{partition_indices, ModelId, ModelPrior, ParamPrior};
use crate::posterior::model_posterior;
use crate::rng::RngStream;
use crate::stats::{expit, mvn_sample};

/// Attempts at drawing a model whose constrained fit converges.
pub const MAX_MODEL_RETRIES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    pub param: ParamPrior,
    pub model: ModelPrior,
}

impl Priors {
    /// Diffuse normal priors on every slot and a uniform model prior.
    pub fn diffuse(dim: usize) -> Self {
        Self {
            param: ParamPrior::diffuse(dim),
            model: ModelPrior::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiConfig {
    /// Number of imputations `M`.
    pub m: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub stream_id: u64,
}

impl Default for MiConfig {
    fn default() -> Self {
        Self {
            m: 50,
            burn_in: 200,
            thin: 10,
            seed: 0,
            stream_id: 0,
        }
    }
}

/// State of the chain between sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct DAState {
    pub completed_y: Vec<f64>,
    pub current_kappa: ModelId,
    /// Full-length draw; restricted slots are zero.
    pub current_theta: Vec<f64>,
    pub iteration: usize,
}

/// One retained imputation after its analysis refit.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub kappa: ModelId,
    pub theta: Vec<f64>,
    pub v: Matrix,
}

/// Rubin's combining rules.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    pub theta_mi: Vec<f64>,
    pub v_mi: Matrix,
    pub w_bar: Matrix,
    pub b: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MIOutput {
    pub draws: Vec<Draw>,
    pub pooled: Pooled,
}

impl MIOutput {
    /// Fraction of retained imputation models including covariate `j`, for
    /// `j = 1..=p_free`.
    pub fn inclusion_frequencies(&self) -> Vec<f64> {
        let p_free = self.draws.first().map_or(0, |d| d.kappa.p_free());
        let m = self.draws.len() as f64;
        (1..=p_free)
            .map(|j| self.draws.iter().filter(|d| d.kappa.includes(j)).count() as f64 / m)
            .collect()
    }
}

/// `θ̂_MI = M⁻¹ Σ θ⁽ᵐ⁾`, `W = M⁻¹ Σ V⁽ᵐ⁾`,
/// `B = (M − 1)⁻¹ Σ (θ⁽ᵐ⁾ − θ̂_MI)(θ⁽ᵐ⁾ − θ̂_MI)ᵀ`, `V_MI = W + (1 + 1/M) B`.
pub fn rubin_pool(draws: &[(Vec<f64>, Matrix)]) -> Result<Pooled> {
    let m = draws.len();
    if m < 2 {
        return Err(Error::InsufficientDraws(m));
    }
    let dim = draws[0].0.len();
    for (t, v) in draws {
        if t.len() != dim || v.rows() != dim || v.cols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: t.len(),
            });
        }
    }
    let mf = m as f64;
    let mut theta_mi = vec![0.0; dim];
    let mut w_bar = Matrix::zeros(dim, dim);
    for (t, v) in draws {
        for (acc, x) in theta_mi.iter_mut().zip(t) {
            *acc += x;
        }
        w_bar = w_bar.add(v)?;
    }
    theta_mi.iter_mut().for_each(|x| *x /= mf);
    let w_bar = w_bar.scale(1.0 / mf);
    let mut b = Matrix::zeros(dim, dim);
    for (t, _) in draws {
        let d: Vec<f64> = t.iter().zip(&theta_mi).map(|(a, c)| a - c).collect();
        b.add_outer(1.0 / (mf - 1.0), &d, &d);
    }
    let v_mi = w_bar.add(&b.scale(1.0 + 1.0 / mf))?;
    Ok(Pooled {
        theta_mi,
        v_mi,
        w_bar,
        b,
    })
}

fn draw_constrained(
    fit_theta: &[f64],
    fit_v: &Matrix,
    kappa: &ModelId,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let (active, _) = partition_indices(kappa);
    let mu: Vec<f64> = active.iter().map(|&i| fit_theta[i]).collect();
    let cov = fit_v.select(&active, &active);
    let draw = mvn_sample(&mu, &cov, rng)?;
    if draw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite parameter draw"));
    }
    let mut full = vec![0.0; kappa.dim()];
    for (&i, v) in active.iter().zip(draw) {
        full[i] = v;
    }
    Ok(full)
}

/// Refills the missing slots of `completed_y` from `f(y | x; θ)`.
fn impute_missing(data: &Dataset, theta: &[f64], completed_y: &mut [f64], rng: &mut RngStream) {
    let x = data.x();
    let p = data.p();
    let sd = match data.family() {
        Family::Gaussian => (0.5 * theta[p]).exp(),
        Family::Binomial => 0.0,
    };
    for (i, &observed) in data.delta().iter().enumerate() {
        if observed {
            continue;
        }
        let eta: f64 = x.row(i).iter().zip(&theta[..p]).map(|(a, b)| a * b).sum();
        completed_y[i] = match data.family() {
            Family::Gaussian => eta + sd * rng.standard_normal(),
            Family::Binomial => f64::from(u8::from(rng.bernoulli(expit(eta)))),
        };
    }
}

fn init_model(data: &Dataset, models: &[ModelId]) -> Result<ModelId> {
    match models {
        [] => Err(Error::InvalidInput("empty candidate set")),
        [only] => Ok(*only),
        _ => ModelId::full(data.p_free(), data.family().has_dispersion()),
    }
}

/// Starts the chain from a predictive draw of the complete-case fit: the
/// unconstrained model, or the only candidate when there is one.
pub fn initial_state(
    data: &Dataset,
    models: &[ModelId],
    design: &DesignInfo,
    rng: &mut RngStream,
) -> Result<DAState> {
    let kappa = init_model(data, models)?;
    let rows: Vec<usize> = (0..data.n()).filter(|&i| data.delta()[i]).collect();
    let cc = data.subset(&rows)?;
    let fit = fit_with_sandwich(&cc, &kappa, &design.subset(&rows))?.require_converged()?;
    let theta = draw_constrained(&fit.theta_hat, &fit.v_hat, &kappa, rng)?;
    let mut completed_y = data.y().to_vec();
    impute_missing(data, &theta, &mut completed_y, rng);
    Ok(DAState {
        completed_y,
        current_kappa: kappa,
        current_theta: theta,
        iteration: 0,
    })
}

/// One sweep of the sampler.
pub fn da_iterate(
    state: &DAState,
    data: &Dataset,
    models: &[ModelId],
    priors: &Priors,
    design: &DesignInfo,
    rng: &mut RngStream,
) -> Result<DAState> {
    let completed = data.with_completed(&state.completed_y)?;
    let posterior = if models.len() > 1 {
        let full = ModelId::full(data.p_free(), data.family().has_dispersion())?;
        let fit_full = fit_with_sandwich(&completed, &full, design)?.require_converged()?;
        Some(model_posterior(
            &fit_full,
            models,
            &priors.param,
            &priors.model,
        )?)
    } else if models.is_empty() {
        return Err(Error::InvalidInput("empty candidate set"));
    } else {
        None
    };

    let mut drawn = None;
    for _ in 0..MAX_MODEL_RETRIES {
        let kappa = posterior.as_ref().map_or(models[0], |p| p.sample(rng));
        let fit = fit_with_sandwich(&completed, &kappa, design)?;
        if !fit.converged {
            continue;
        }
        if let Ok(theta) = draw_constrained(&fit.theta_hat, &fit.v_hat, &kappa, rng) {
            drawn = Some((kappa, theta));
            break;
        }
    }
    let (kappa, theta) = drawn.ok_or(Error::ChainStalled)?;

    let mut completed_y = state.completed_y.clone();
    impute_missing(data, &theta, &mut completed_y, rng);
    Ok(DAState {
        completed_y,
        current_kappa: kappa,
        current_theta: theta,
        iteration: state.iteration + 1,
    })
}

/// Runs the chain and returns the retained completed responses with the model
/// drawn at each retained sweep.
pub fn run_chain(
    data: &Dataset,
    models: &[ModelId],
    priors: &Priors,
    design: &DesignInfo,
    config: &MiConfig,
) -> Result<Vec<DAState>> {
    if config.m < 2 {
        return Err(Error::InsufficientDraws(config.m));
    }
    if config.thin == 0 {
        return Err(Error::InvalidInput("thin must be positive"));
    }
    let mut rng = RngStream::new(config.seed, config.stream_id);
    let mut state = initial_state(data, models, design, &mut rng)?;
    for _ in 0..config.burn_in {
        state = da_iterate(&state, data, models, priors, design, &mut rng)?;
    }
    let mut kept = Vec::with_capacity(config.m);
    for _ in 0..config.m {
        for _ in 0..config.thin {
            state = da_iterate(&state, data, models, priors, design, &mut rng)?;
        }
        kept.push(state.clone());
    }
    Ok(kept)
}

/// Multiple imputation with model averaging over `models`.
pub fn run_mi_bma(
    data: &Dataset,
    models: &[ModelId],
    priors: &Priors,
    design: &DesignInfo,
    config: &MiConfig,
) -> Result<MIOutput> {
    let kept = run_chain(data, models, priors, design, config)?;
    let mut draws = Vec::with_capacity(kept.len());
    for state in &kept {
        let completed = data.with_completed(&state.completed_y)?;
        let fit =
            fit_with_sandwich(&completed, &state.current_kappa, design)?.require_converged()?;
        draws.push(Draw {
            kappa: state.current_kappa,
            theta: fit.theta_hat,
            v: fit.v_hat,
        });
    }
    let pairs: Vec<(Vec<f64>, Matrix)> = draws
        .iter()
        .map(|d| (d.theta.clone(), d.v.clone()))
        .collect();
    let pooled = rubin_pool(&pairs)?;
    Ok(MIOutput { draws, pooled })
}

/// Classical multiple imputation under the fixed model `kappa`.
pub fn run_mi_single_model(
    data: &Dataset,
    kappa: &ModelId,
    priors: &Priors,
    design: &DesignInfo,
    config: &MiConfig,
) -> Result<MIOutput> {
    run_mi_bma(data, core::slice::from_ref(kappa), priors, design, config)
}
