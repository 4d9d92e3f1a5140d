//! Partial posterior model probabilities built from the sampling distribution
//! of the unconstrained pseudo-MLE.
//!
//! With `θ̂ ~ N(θ, V̂)` the marginal of a restricted model `κ` factors into the
//! density of the restricted block at its constraint value times an integral
//! over the active block. The closed form used here replaces that integral by
//! the prior evaluated at the conditional mean
//! `θ̃⁰_κ = θ̃_κ + Ṽ_{κκ̄} Ṽ_{κ̄κ̄}⁻¹ (0 − θ̃_κ̄)`; the quadrature routine
//! evaluates the integral exactly for small active sets and serves as its
//! oracle.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::data::Dataset;
use crate::design::{fit_with_sandwich, DesignInfo};
use crate::error::{Error, Result};
use crate::glm::FitResult;
use crate::linalg::Matrix;
use crate::model::{
    partition_indices, prior_logdensity, ModelId, ModelPrior, ParamPrior, SlotPrior,
};
use crate::rng::RngStream;
use crate::stats::{conditional_normal, log_sum_exp, mvn_logpdf, normal_interval_prob, MvnDensity};

/// Normalised log-probabilities over a candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorModelDist {
    entries: Vec<(ModelId, f64)>,
    normalized: bool,
}

impl PosteriorModelDist {
    /// Normalises unnormalised log-weights.
    pub fn from_log_weights(entries: Vec<(ModelId, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("empty candidate set"));
        }
        let logs: Vec<f64> = entries.iter().map(|e| e.1).collect();
        let z = log_sum_exp(&logs)?;
        let entries = entries.into_iter().map(|(m, w)| (m, w - z)).collect();
        Ok(Self {
            entries,
            normalized: true,
        })
    }

    pub fn entries(&self) -> &[(ModelId, f64)] {
        &self.entries
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1.exp()).collect()
    }

    /// Total probability of all entries equal to `kappa`.
    pub fn prob_of(&self, kappa: &ModelId) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.0 == *kappa)
            .map(|e| e.1.exp())
            .sum()
    }

    /// Posterior inclusion probability of covariates `1..=p_free`.
    pub fn inclusion_probabilities(&self) -> Vec<f64> {
        let p_free = self.entries[0].0.p_free();
        (1..=p_free)
            .map(|j| {
                self.entries
                    .iter()
                    .filter(|e| e.0.includes(j))
                    .map(|e| e.1.exp())
                    .sum()
            })
            .collect()
    }

    pub fn sample(&self, rng: &mut RngStream) -> ModelId {
        let probs = self.probabilities();
        self.entries[rng.categorical(&probs)].0
    }
}

fn check_full_fit(fit_full: &FitResult, kappa: &ModelId) -> Result<()> {
    if !fit_full.kappa.is_full() {
        return Err(Error::PreconditionViolated(
            "model probabilities need the unconstrained fit",
        ));
    }
    if !fit_full.converged {
        return Err(Error::NotConverged {
            iterations: fit_full.iterations,
        });
    }
    if !fit_full.kappa.compatible(kappa) {
        return Err(Error::InvalidInput("model layout does not match the fit"));
    }
    Ok(())
}

/// Closed-form `log p̃_g(D_n | κ)`.
///
/// For a restricted model: `log φ(0 | θ̃_κ̄, Ṽ_κ̄κ̄) + log p(θ̃⁰_κ | κ)`.
/// For the full model: `log p(θ̂ | κ)`.
pub fn approx_log_marginal(
    fit_full: &FitResult,
    kappa: &ModelId,
    prior: &ParamPrior,
) -> Result<f64> {
    check_full_fit(fit_full, kappa)?;
    let (_, restricted) = partition_indices(kappa);
    if restricted.is_empty() {
        return prior_logdensity(&fit_full.theta_hat, kappa, prior);
    }
    let theta_r: Vec<f64> = restricted.iter().map(|&i| fit_full.theta_hat[i]).collect();
    let v_rr = fit_full.v_hat.select(&restricted, &restricted);
    let zeros = vec![0.0; restricted.len()];
    let restricted_term = mvn_logpdf(&zeros, &theta_r, &v_rr)?;
    let (theta0, _) =
        conditional_normal(&fit_full.theta_hat, &fit_full.v_hat, &restricted, &zeros)?;
    Ok(restricted_term + prior_logdensity(&theta0, kappa, prior)?)
}

/// Posterior over `models` from one unconstrained fit.
pub fn model_posterior(
    fit_full: &FitResult,
    models: &[ModelId],
    param_prior: &ParamPrior,
    model_prior: &ModelPrior,
) -> Result<PosteriorModelDist> {
    if models.is_empty() {
        return Err(Error::InvalidInput("empty candidate set"));
    }
    let mut entries = Vec::with_capacity(models.len());
    for kappa in models {
        let lm = approx_log_marginal(fit_full, kappa, param_prior)?;
        entries.push((*kappa, lm + model_prior.log_prob(kappa, models)));
    }
    PosteriorModelDist::from_log_weights(entries)
}

/// Tensor-product Gauss–Legendre grid over a box of `±half_width_sd`
/// standard deviations around the integrand's centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nodes_per_dim: usize,
    pub half_width_sd: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nodes_per_dim: 48,
            half_width_sd: 8.0,
        }
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(x) and P_n'(x) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
            x = 0.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `log ∫ φ(θ̂ | θ, V̂) p(θ_κ | κ) dθ_κ` with `θ = (θ_κ, 0)`, by tensor-grid
/// quadrature. Only for `|κ| <= 3`.
pub fn exact_log_marginal_quadrature(
    fit_full: &FitResult,
    kappa: &ModelId,
    prior: &ParamPrior,
    grid: &GridSpec,
) -> Result<f64> {
    check_full_fit(fit_full, kappa)?;
    let (active, restricted) = partition_indices(kappa);
    let d = active.len();
    if d > 3 {
        return Err(Error::DimensionTooLarge { dim: d });
    }
    if grid.nodes_per_dim == 0 || !(grid.half_width_sd > 0.0) {
        return Err(Error::InvalidInput("grid needs nodes and a positive width"));
    }
    // centre and scale of the box: the active block given the restriction
    let (centre, cov) = if restricted.is_empty() {
        (fit_full.theta_hat.clone(), fit_full.v_hat.clone())
    } else {
        let zeros = vec![0.0; restricted.len()];
        conditional_normal(&fit_full.theta_hat, &fit_full.v_hat, &restricted, &zeros)?
    };
    let sd: Vec<f64> = cov.diag().iter().map(|v| v.sqrt()).collect();
    let density = MvnDensity::new(&fit_full.theta_hat, &fit_full.v_hat)?;
    let (gx, gw) = gauss_legendre(grid.nodes_per_dim);
    let half: Vec<f64> = sd.iter().map(|s| grid.half_width_sd * s).collect();
    let log_jac: f64 = half.iter().map(|h| h.ln()).sum();

    let n = grid.nodes_per_dim;
    let total = n.pow(d as u32);
    let mut terms = Vec::with_capacity(total);
    let mut theta = vec![0.0; kappa.dim()];
    let mut theta_active = vec![0.0; d];
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let mut log_w = log_jac;
        for k in 0..d {
            theta_active[k] = centre[k] + half[k] * gx[idx[k]];
            log_w += gw[idx[k]].ln();
        }
        for (&slot, &t) in active.iter().zip(&theta_active) {
            theta[slot] = t;
        }
        let lp = prior_logdensity(&theta_active, kappa, prior)?;
        terms.push(log_w + density.logpdf(&theta)? + lp);
        // odometer increment
        for k in 0..d {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
    log_sum_exp(&terms)
}

/// `log ∫ φ(θ̂_κ | θ_κ, V̂(θ̂_κ)) p(θ_κ | κ) dθ_κ` from a model's own
/// constrained fit.
///
/// All-normal priors give the exact convolution `φ(θ̂_κ | m, V̂ + P)`;
/// all-uniform (box) priors give `vol⁻¹ · P(θ̂_κ + e ∈ box)` with the box mass
/// from the Bonferroni lower bound `1 − Σ_j P(outside_j)`.
pub fn naive_log_marginal(own_fit: &FitResult, prior: &ParamPrior) -> Result<f64> {
    let kappa = own_fit.kappa;
    if prior.dim() != kappa.dim() {
        return Err(Error::DimensionMismatch {
            expected: kappa.dim(),
            found: prior.dim(),
        });
    }
    let (active, _) = partition_indices(&kappa);
    let theta = own_fit.active_theta();
    let v = own_fit.active_v();
    let slots: Vec<SlotPrior> = active.iter().map(|&i| *prior.slot(i)).collect();
    if slots.iter().all(|s| matches!(s, SlotPrior::Normal { .. })) {
        let mut cov = v.clone();
        let mut mean = vec![0.0; slots.len()];
        for (k, s) in slots.iter().enumerate() {
            if let SlotPrior::Normal { mean: m, var } = *s {
                cov[(k, k)] += var;
                mean[k] = m;
            }
        }
        return mvn_logpdf(&theta, &mean, &cov);
    }
    if slots.iter().all(|s| matches!(s, SlotPrior::Uniform { .. })) {
        let mut log_vol = 0.0;
        let mut outside = 0.0;
        for (k, s) in slots.iter().enumerate() {
            if let SlotPrior::Uniform { lo, hi } = *s {
                log_vol += (hi - lo).ln();
                outside += 1.0 - normal_interval_prob(lo, hi, theta[k], v[(k, k)].sqrt());
            }
        }
        let mass = (1.0 - outside).max(f64::MIN_POSITIVE);
        return Ok(mass.ln() - log_vol);
    }
    Err(Error::InvalidInput(
        "naive marginal needs all-normal or all-uniform active priors",
    ))
}

/// Per-model box priors whose density-times-model-prior products agree at each
/// model's own estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualProductPriors {
    pub tau: ParamPrior,
    pub kappa: ParamPrior,
    pub model_prior: ModelPrior,
}

/// Uniform boxes `θ̂_m ± half_width_sd · sd` on each model's active slots,
/// with `p(m) ∝ vol_m` so that `p(θ_m | m) p(m)` is the same constant for both.
pub fn equal_product_box_priors(
    data: &Dataset,
    tau: &ModelId,
    kappa: &ModelId,
    design: &DesignInfo,
    half_width_sd: f64,
) -> Result<EqualProductPriors> {
    let mut priors = Vec::with_capacity(2);
    let mut log_weights = Vec::with_capacity(2);
    for m in [tau, kappa] {
        let fit = fit_with_sandwich(data, m, design)?.require_converged()?;
        let mut slots = vec![SlotPrior::Uniform { lo: -1.0, hi: 1.0 }; m.dim()];
        let mut log_vol = 0.0;
        for i in partition_indices(m).0 {
            let h = half_width_sd * fit.v_hat[(i, i)].sqrt();
            if !(h > 0.0) {
                return Err(Error::PreconditionViolated(
                    "degenerate variance for a box prior",
                ));
            }
            slots[i] = SlotPrior::Uniform {
                lo: fit.theta_hat[i] - h,
                hi: fit.theta_hat[i] + h,
            };
            log_vol += (2.0 * h).ln();
        }
        priors.push(ParamPrior::new(slots));
        log_weights.push((*m, log_vol));
    }
    let kappa_prior = priors.pop().expect("two priors");
    let tau_prior = priors.pop().expect("two priors");
    Ok(EqualProductPriors {
        tau: tau_prior,
        kappa: kappa_prior,
        model_prior: ModelPrior::from_log_weights(log_weights)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifiabilityReport {
    /// `p_g(κ | D_n) / p_g(τ | D_n)` when each model is scored by its own
    /// constrained estimator.
    pub ratio: f64,
    /// The same ratio when both are scored through the unconstrained
    /// estimator's sampling distribution.
    pub proposed_ratio: f64,
}

/// Compares the naive and the unconstrained-estimator model posteriors for a
/// nested pair `τ ⊂ κ` under priors with equal density-times-model-prior
/// products.
pub fn identifiability_diagnostic(
    data: &Dataset,
    tau: &ModelId,
    kappa_superset: &ModelId,
    priors: &EqualProductPriors,
    design: &DesignInfo,
) -> Result<IdentifiabilityReport> {
    if !tau.is_subset_of(kappa_superset) || tau == kappa_superset {
        return Err(Error::PreconditionViolated(
            "tau must be a proper sub-model of kappa",
        ));
    }
    let pair = [*tau, *kappa_superset];
    let fit_tau = fit_with_sandwich(data, tau, design)?.require_converged()?;
    let fit_kappa = fit_with_sandwich(data, kappa_superset, design)?.require_converged()?;

    let lp_tau = priors.model_prior.log_prob(tau, &pair);
    let lp_kappa = priors.model_prior.log_prob(kappa_superset, &pair);
    let prod_tau = prior_logdensity(&fit_tau.active_theta(), tau, &priors.tau)? + lp_tau;
    let prod_kappa =
        prior_logdensity(&fit_kappa.active_theta(), kappa_superset, &priors.kappa)? + lp_kappa;
    if !prod_tau.is_finite() || !prod_kappa.is_finite() || (prod_tau - prod_kappa).abs() > 1e-9 {
        return Err(Error::PreconditionViolated(
            "prior density times model prior must agree across the pair",
        ));
    }

    let naive_tau = naive_log_marginal(&fit_tau, &priors.tau)? + lp_tau;
    let naive_kappa = naive_log_marginal(&fit_kappa, &priors.kappa)? + lp_kappa;

    let full = ModelId::full(tau.p_free(), tau.has_dispersion())?;
    let fit_full = fit_with_sandwich(data, &full, design)?.require_converged()?;
    let prop_tau = approx_log_marginal(&fit_full, tau, &priors.tau)? + lp_tau;
    let prop_kappa = approx_log_marginal(&fit_full, kappa_superset, &priors.kappa)? + lp_kappa;

    Ok(IdentifiabilityReport {
        ratio: (naive_kappa - naive_tau).exp(),
        proposed_ratio: (prop_kappa - prop_tau).exp(),
    })
}

/// Helper for tests and callers holding a bare `(θ̂, V̂)` pair.
pub fn fit_from_moments(theta_hat: Vec<f64>, v_hat: Matrix, kappa: ModelId) -> FitResult {
    FitResult {
        theta_hat,
        v_hat,
        kappa,
        loglik: 0.0,
        converged: true,
        iterations: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::LN_2PI;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 16, 48] {
            let (x, w) = gauss_legendre(n);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n={n}");
            if n >= 3 {
                let x4: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(4)).sum();
                assert!((x4 - 0.4).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn full_model_is_prior_at_estimate() {
        let full = ModelId::full(1, false).unwrap();
        let fit = fit_from_moments(
            vec![1.0, 0.3],
            Matrix::from_rows(&[[0.04, 0.01], [0.01, 0.09]]).unwrap(),
            full,
        );
        let prior = ParamPrior::diffuse(2);
        let got = approx_log_marginal(&fit, &full, &prior).unwrap();
        assert_eq!(got, prior_logdensity(&[1.0, 0.3], &full, &prior).unwrap());
    }

    #[test]
    fn diagonal_zero_deviation() {
        let full = ModelId::full(1, false).unwrap();
        let fit = fit_from_moments(vec![1.0, 0.0], Matrix::from_diag(&[0.04, 0.09]), full);
        let kappa = ModelId::null(1, false).unwrap();
        let prior = ParamPrior::diffuse(2);
        let got = approx_log_marginal(&fit, &kappa, &prior).unwrap();
        let want =
            -0.5 * (LN_2PI + 0.09f64.ln()) + prior_logdensity(&[1.0], &kappa, &prior).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn singleton_and_duplicate_posteriors() {
        let full = ModelId::full(1, false).unwrap();
        let fit = fit_from_moments(
            vec![1.0, 0.3],
            Matrix::from_rows(&[[0.04, 0.01], [0.01, 0.09]]).unwrap(),
            full,
        );
        let prior = ParamPrior::diffuse(2);
        let one = model_posterior(&fit, &[full], &prior, &ModelPrior::Uniform).unwrap();
        assert!((one.probabilities()[0] - 1.0).abs() < 1e-15);
        let null = ModelId::null(1, false).unwrap();
        let two = model_posterior(&fit, &[null, null], &prior, &ModelPrior::Uniform).unwrap();
        let p = two.probabilities();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quadrature_rejects_large_models() {
        let full = ModelId::full(3, false).unwrap();
        let fit = fit_from_moments(vec![0.0; 4], Matrix::identity(4), full);
        let r = exact_log_marginal_quadrature(
            &fit,
            &full,
            &ParamPrior::diffuse(4),
            &GridSpec::default(),
        );
        assert_eq!(r, Err(Error::DimensionTooLarge { dim: 4 }));
    }

    #[test]
    fn needs_unconstrained_fit() {
        let null = ModelId::null(1, false).unwrap();
        let fit = fit_from_moments(vec![0.0, 0.0], Matrix::identity(2), null);
        assert!(approx_log_marginal(&fit, &null, &ParamPrior::diffuse(2)).is_err());
    }
}
