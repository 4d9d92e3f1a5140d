//! Multiple imputation with Bayesian model averaging for item nonresponse
//! under informative sampling.
//!
//! The crate is `no_std` (with `alloc`). File formats, the command line and the
//! parallel Monte Carlo driver live in the companion `mibma` crate.
//!
//! Parameter layout used throughout: for a design with `p_free` selectable
//! covariates the full parameter vector is
//! `(β₀, β₁, …, β_{p_free}[, log σ²])`, the dispersion slot being present for the
//! Gaussian family only.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod design;
pub mod error;
pub mod glm;
pub mod impute;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod posterior;
pub mod rng;
pub mod scenario;
pub mod stats;

pub use data::{Dataset, Family};
pub use design::{fit_with_sandwich, sandwich_variance, DesignInfo};
pub use error::{Error, Result};
pub use glm::{fit_pseudo_mle, score_hessian, FitResult, UnitDerivatives};
pub use impute::{
    da_iterate, initial_state, rubin_pool, run_mi_bma, run_mi_single_model, DAState, Draw,
    MIOutput, MiConfig, Pooled, Priors,
};
pub use linalg::{Cholesky, Matrix};
pub use metrics::{aggregate_metrics, run_replication, Method, MetricsRow, ReplicationOutcome};
pub use model::{
    enumerate_models, partition_indices, prior_logdensity, ModelId, ModelPrior, ParamPrior,
    SlotPrior,
};
pub use posterior::{
    approx_log_marginal, exact_log_marginal_quadrature, identifiability_diagnostic,
    model_posterior, GridSpec, IdentifiabilityReport, PosteriorModelDist,
};
pub use rng::RngStream;
pub use scenario::{
    draw_sample, generate_population, informative_sample, Population, Scenario, ScenarioConfig,
};
pub use stats::{conditional_normal, log_sum_exp, mvn_logpdf, mvn_sample, MvnDensity};
