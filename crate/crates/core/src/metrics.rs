//! One Monte Carlo replication across the imputation arms, and the summary
//! metrics over many replications.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::design::DesignInfo;
use crate::error::{Error, Result};
use crate::impute::{run_mi_bma, run_mi_single_model, MIOutput, MiConfig, Priors};
use crate::model::{enumerate_models, ModelId};
use crate::rng::RngStream;
use crate::scenario::{draw_sample, generate_population, ScenarioConfig};

/// Normal quantile used for the nominal 95% intervals.
pub const Z_95: f64 = 1.96;

/// Coefficients summarised by the metrics: `β₀` and `β₁`.
pub const TARGETS: [usize; 2] = [0, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Imputation under the generating model.
    MiTrue,
    /// Imputation under the model with every covariate.
    MiFull,
    /// Imputation averaging over all candidate models.
    MiBma,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::MiTrue, Method::MiFull, Method::MiBma];

    pub fn name(self) -> &'static str {
        match self {
            Method::MiTrue => "MI_TRUE",
            Method::MiFull => "MI_FULL",
            Method::MiBma => "MI_BMA",
        }
    }

    /// RNG task slot of the arm within a replication; slot 0 is the
    /// population and sample.
    pub fn task(self) -> u64 {
        match self {
            Method::MiTrue => 1,
            Method::MiFull => 2,
            Method::MiBma => 3,
        }
    }
}

/// What a replication keeps from one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmResult {
    pub method: Method,
    /// Pooled estimates of the targets.
    pub estimate: Vec<f64>,
    /// Pooled standard errors of the targets.
    pub std_error: Vec<f64>,
    /// Median-probability selection: covariate `j` is selected when it is in
    /// at least half of the retained imputation models.
    pub selected: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub replication: u64,
    pub sample_size: usize,
    /// One entry per requested method; `Err` carries the arm's failure.
    pub arms: Vec<(Method, core::result::Result<ArmResult, Error>)>,
    /// Full output per arm, kept only when requested.
    pub outputs: Vec<(Method, MIOutput)>,
}

impl ReplicationOutcome {
    pub fn all_succeeded(&self) -> bool {
        self.arms.iter().all(|(_, r)| r.is_ok())
    }
}

fn summarise(method: Method, out: &MIOutput) -> ArmResult {
    let v = &out.pooled.v_mi;
    ArmResult {
        method,
        estimate: TARGETS.iter().map(|&k| out.pooled.theta_mi[k]).collect(),
        std_error: TARGETS.iter().map(|&k| v[(k, k)].max(0.0).sqrt()).collect(),
        selected: out
            .inclusion_frequencies()
            .iter()
            .map(|&f| f >= 0.5)
            .collect(),
    }
}

/// Fresh population, one Poisson sample, then every requested arm on it.
///
/// Streams derive from `(seed, replication)` only, so results do not depend
/// on which thread runs the replication or in what order.
pub fn run_replication(
    cfg: &ScenarioConfig,
    methods: &[Method],
    mi: &MiConfig,
    seed: u64,
    replication: u64,
    keep_outputs: bool,
) -> Result<ReplicationOutcome> {
    let mut rng = RngStream::for_task(seed, replication, 0);
    let population = generate_population(cfg, &mut rng)?;
    let data = draw_sample(&population, cfg, &mut rng)?;
    let dispersion = cfg.family().has_dispersion();
    let priors = Priors::diffuse(cfg.p_free + 1 + usize::from(dispersion));
    let design = DesignInfo::Poisson;
    let all_models = enumerate_models(cfg.p_free, dispersion)?;
    let tau = cfg.true_model()?;
    let full = ModelId::full(cfg.p_free, dispersion)?;

    let mut arms = Vec::with_capacity(methods.len());
    let mut outputs = Vec::new();
    for &method in methods {
        let config = MiConfig {
            seed,
            stream_id: RngStream::task_stream_id(replication, method.task()),
            ..*mi
        };
        let out = match method {
            Method::MiTrue => run_mi_single_model(&data, &tau, &priors, &design, &config),
            Method::MiFull => run_mi_single_model(&data, &full, &priors, &design, &config),
            Method::MiBma => run_mi_bma(&data, &all_models, &priors, &design, &config),
        };
        match out {
            Ok(o) => {
                arms.push((method, Ok(summarise(method, &o))));
                if keep_outputs {
                    outputs.push((method, o));
                }
            }
            Err(e) => arms.push((method, Err(e))),
        }
    }
    Ok(ReplicationOutcome {
        replication,
        sample_size: data.n(),
        arms,
        outputs,
    })
}

/// One line of the results table: a method and a target coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub method: Method,
    /// Index of the coefficient (`0` for `β₀`, `1` for `β₁`).
    pub target: usize,
    pub cp: f64,
    pub var: f64,
    pub bias: f64,
    pub mse: f64,
    pub tpr: f64,
    pub tnr: f64,
    /// Replications in which every arm succeeded.
    pub replications: usize,
    /// Replications in which this arm failed.
    pub failures: usize,
}

impl MetricsRow {
    pub fn target_name(&self) -> &'static str {
        match self.target {
            0 => "beta0",
            1 => "beta1",
            _ => "beta",
        }
    }
}

/// Coverage, variance (divisor `R − 1`), bias, MSE and selection rates over the
/// replications in which every arm succeeded.
pub fn aggregate_metrics(
    cfg: &ScenarioConfig,
    methods: &[Method],
    outcomes: &[ReplicationOutcome],
) -> Vec<MetricsRow> {
    let usable: Vec<&ReplicationOutcome> = outcomes.iter().filter(|o| o.all_succeeded()).collect();
    let r = usable.len();
    let relevant: Vec<bool> = (1..=cfg.p_free).map(|j| cfg.beta[j] != 0.0).collect();
    let n_rel = relevant.iter().filter(|b| **b).count();
    let n_irr = relevant.len() - n_rel;

    let mut rows = Vec::with_capacity(methods.len() * TARGETS.len());
    for &method in methods {
        let failures = outcomes
            .iter()
            .filter(|o| o.arms.iter().any(|(m, res)| *m == method && res.is_err()))
            .count();
        let results: Vec<&ArmResult> = usable
            .iter()
            .filter_map(|o| o.arms.iter().find(|(m, _)| *m == method))
            .filter_map(|(_, res)| res.as_ref().ok())
            .collect();

        let mut tpr = 0.0;
        let mut tnr = 0.0;
        for a in &results {
            let hits = |want: bool| {
                a.selected
                    .iter()
                    .zip(&relevant)
                    .filter(|(s, rel)| **rel == want && **s == want)
                    .count() as f64
            };
            tpr += if n_rel > 0 {
                hits(true) / n_rel as f64
            } else {
                1.0
            };
            tnr += if n_irr > 0 {
                hits(false) / n_irr as f64
            } else {
                1.0
            };
        }
        let rf = r as f64;
        for (t, &k) in TARGETS.iter().enumerate() {
            let truth = cfg.beta[k];
            let est: Vec<f64> = results.iter().map(|a| a.estimate[t]).collect();
            let covered = results
                .iter()
                .filter(|a| (a.estimate[t] - truth).abs() <= Z_95 * a.std_error[t])
                .count();
            let mean = est.iter().sum::<f64>() / rf;
            let var = if r > 1 {
                est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (rf - 1.0)
            } else {
                f64::NAN
            };
            let mse = est.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / rf;
            rows.push(MetricsRow {
                method,
                target: k,
                cp: covered as f64 / rf,
                var,
                bias: mean - truth,
                mse,
                tpr: tpr / rf,
                tnr: tnr / rf,
                replications: r,
                failures,
            });
        }
    }
    rows
}

/// Arms requested in the results table order.
pub fn default_methods() -> Vec<Method> {
    vec![Method::MiTrue, Method::MiFull, Method::MiBma]
}
