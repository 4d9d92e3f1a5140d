//! Parallel Monte Carlo driver over independent replications.

use rayon::prelude::*;

use mibma_core::metrics::{
    aggregate_metrics, run_replication, Method, MetricsRow, ReplicationOutcome,
};
use mibma_core::{MiConfig, ScenarioConfig};

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct MonteCarloRun {
    /// Ordered by replication index.
    pub outcomes: Vec<ReplicationOutcome>,
    pub rows: Vec<MetricsRow>,
}

/// Runs `reps` replications on a pool of `threads` workers (all cores when
/// `None`). Each replication draws only from streams keyed by
/// `(seed, replication)`, so the result is the same for any thread count.
pub fn run_monte_carlo(
    cfg: &ScenarioConfig,
    methods: &[Method],
    reps: usize,
    mi: &MiConfig,
    seed: u64,
    threads: Option<usize>,
    keep_outputs: bool,
) -> Result<MonteCarloRun, CliError> {
    if reps < 2 {
        return Err(CliError::Usage(
            "at least two replications are needed".into(),
        ));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let outcomes: Vec<ReplicationOutcome> = pool.install(|| {
        (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                run_replication(cfg, methods, mi, seed, r, keep_outputs).unwrap_or_else(|e| {
                    ReplicationOutcome {
                        replication: r,
                        sample_size: 0,
                        arms: methods.iter().map(|&m| (m, Err(e.clone()))).collect(),
                        outputs: Vec::new(),
                    }
                })
            })
            .collect()
    });
    let rows = aggregate_metrics(cfg, methods, &outcomes);
    Ok(MonteCarloRun { outcomes, rows })
}
