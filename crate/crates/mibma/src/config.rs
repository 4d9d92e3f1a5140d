//! Flat `key = value` run configuration. Keys mirror the scenario fields;
//! `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use mibma_core::{MiConfig, Scenario, ScenarioConfig};

use crate::error::CliError;

/// Everything a `simulate` run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub reps: usize,
    pub mi: MiConfig,
    pub seed: u64,
}

impl RunConfig {
    /// Reduced-scale defaults: `N = 5000`, six covariates, 200 replications,
    /// 50 imputations.
    pub fn desk(scenario: Scenario) -> Self {
        Self {
            scenario: ScenarioConfig::desk(scenario),
            reps: 200,
            mi: MiConfig::default(),
            seed: 0,
        }
    }

    /// The resolved configuration as `key=value` lines.
    pub fn manifest(&self) -> String {
        let s = &self.scenario;
        let beta: Vec<String> = s.beta.iter().map(|b| b.to_string()).collect();
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        line("scenario", s.scenario.name().to_string());
        line("n_pop", s.n_pop.to_string());
        line("p_free", s.p_free.to_string());
        line("beta", beta.join(","));
        line("sigma2", s.sigma2.to_string());
        line("x_mean", s.x_mean.to_string());
        line("x_var", s.x_var.to_string());
        line("response_intercept", s.response.0.to_string());
        line("response_slope", s.response.1.to_string());
        line("sampling_intercept", s.sampling.0.to_string());
        line("sampling_slope", s.sampling.1.to_string());
        line("reps", self.reps.to_string());
        line("m", self.mi.m.to_string());
        line("burn_in", self.mi.burn_in.to_string());
        line("thin", self.mi.thin.to_string());
        line("seed", self.seed.to_string());
        out
    }
}

pub fn parse_scenario(s: &str) -> Result<Scenario, CliError> {
    match s.trim() {
        "I" | "i" | "1" => Ok(Scenario::I),
        "II" | "ii" | "2" => Ok(Scenario::II),
        other => Err(CliError::Usage(format!(
            "unknown scenario '{other}' (expected I or II)"
        ))),
    }
}

/// Reads `key = value` pairs in file order.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "{}:{}: expected key=value",
                path.display(),
                lineno + 1
            ))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("invalid value for {key}: '{v}'")))
}

fn positive(key: &str, v: &str) -> Result<usize, CliError> {
    let n: usize = num(key, v)?;
    if n == 0 {
        return Err(CliError::Usage(format!("{key} must be positive")));
    }
    Ok(n)
}

/// Applies one setting. `p_free` resizes the coefficient vector to the
/// scenario's default pattern; set `beta` afterwards to override it.
pub fn apply(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), CliError> {
    let s = &mut cfg.scenario;
    match key {
        "scenario" => {
            let sc = parse_scenario(value)?;
            if sc != s.scenario {
                let fresh = ScenarioConfig::with_size(sc, s.n_pop, s.p_free);
                *s = fresh;
            }
        }
        "n_pop" | "N" => s.n_pop = positive(key, value)?,
        "p_free" => {
            let p = positive(key, value)?;
            let mut fresh = ScenarioConfig::with_size(s.scenario, s.n_pop, p);
            fresh.seed = s.seed;
            fresh.sigma2 = s.sigma2;
            fresh.x_mean = s.x_mean;
            fresh.x_var = s.x_var;
            fresh.response = s.response;
            fresh.sampling = s.sampling;
            *s = fresh;
        }
        "beta" => {
            let b = value
                .split(',')
                .map(|v| num::<f64>(key, v.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            if b.len() != s.p_free + 1 {
                return Err(CliError::Usage(format!(
                    "beta needs {} entries",
                    s.p_free + 1
                )));
            }
            s.beta = b;
        }
        "sigma2" => s.sigma2 = num(key, value)?,
        "x_mean" => s.x_mean = num(key, value)?,
        "x_var" => s.x_var = num(key, value)?,
        "response_intercept" => s.response.0 = num(key, value)?,
        "response_slope" => s.response.1 = num(key, value)?,
        "sampling_intercept" => s.sampling.0 = num(key, value)?,
        "sampling_slope" => s.sampling.1 = num(key, value)?,
        "seed" => cfg.seed = num(key, value)?,
        "reps" | "R" => cfg.reps = positive(key, value)?,
        "m" | "M" => cfg.mi.m = positive(key, value)?,
        "burn_in" => cfg.mi.burn_in = num(key, value)?,
        "thin" => cfg.mi.thin = positive(key, value)?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown configuration key '{other}'"
            )))
        }
    }
    Ok(())
}

/// Applies a parsed file: `scenario` first, then `p_free`, then the rest, so
/// the result does not depend on line order.
pub fn apply_all(cfg: &mut RunConfig, map: &BTreeMap<String, String>) -> Result<(), CliError> {
    for key in ["scenario", "p_free"] {
        if let Some(v) = map.get(key) {
            apply(cfg, key, v)?;
        }
    }
    for (k, v) in map {
        if k != "scenario" && k != "p_free" {
            apply(cfg, k, v)?;
        }
    }
    Ok(())
}
