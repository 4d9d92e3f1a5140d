//! `mibma simulate | fit | mi`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use mibma_core::metrics::default_methods;
use mibma_core::{
    enumerate_models, fit_with_sandwich, model_posterior, run_mi_bma, run_mi_single_model,
    DesignInfo, Family, MiConfig, ModelId, Priors,
};

use crate::config::{apply, apply_all, parse_scenario, read_config_file, RunConfig};
use crate::error::CliError;
use crate::harness::run_monte_carlo;
use crate::io;

/// Environment variable consulted for the seed when neither the flag nor the
/// config file sets one.
pub const SEED_ENV: &str = "MIBMA_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "mibma",
    version,
    about = "Multiple imputation with Bayesian model averaging under informative sampling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo study over the imputation arms; writes metrics.csv and manifest.txt.
    Simulate(SimulateArgs),
    /// Survey-weighted fit of one model on a CSV sample; writes fit.csv.
    Fit(FitArgs),
    /// Multiple imputation on a CSV sample; writes mi.csv, models.csv and draws.csv.
    Mi(MiArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// I (Gaussian) or II (binary).
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// key=value configuration file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Population size.
    #[arg(long = "n-pop")]
    pub n_pop: Option<usize>,
    /// Number of imputations.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long = "p-free")]
    pub p_free: Option<usize>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write draws_<r>.csv for every replication.
    #[arg(long)]
    pub draws: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Binomial,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Binomial => Family::Binomial,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with columns y, delta, pi, x1..xp.
    #[arg(long)]
    pub data: PathBuf,
    /// Hex mask of included covariates (default: all).
    #[arg(long)]
    pub mask: Option<String>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyArg,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write posterior.csv: model probabilities over all masks.
    #[arg(long)]
    pub posterior: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MiMode {
    Bma,
    Single,
}

#[derive(Debug, Args)]
pub struct MiArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "bma")]
    pub mode: MiMode,
    /// Hex mask of the imputation model; required with --mode single.
    #[arg(long)]
    pub mask: Option<String>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyArg,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got '{v}'"))
        }),
        Err(_) => Ok(None),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))
}

fn parse_mask(mask: Option<&str>, p_free: usize, dispersion: bool) -> Result<ModelId, CliError> {
    match mask {
        Some(m) => ModelId::from_hex(m, p_free, dispersion)
            .map_err(|e| CliError::Usage(format!("--mask {m}: {e}"))),
        None => ModelId::full(p_free, dispersion).map_err(|e| CliError::Usage(e.to_string())),
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => Some(read_config_file(p)?),
        None => None,
    };
    let scenario = match (
        &args.scenario,
        file.as_ref().and_then(|f| f.get("scenario")),
    ) {
        (Some(s), _) => parse_scenario(s)?,
        (None, Some(s)) => parse_scenario(s)?,
        (None, None) => mibma_core::Scenario::I,
    };
    let mut cfg = RunConfig::desk(scenario);
    let mut seed = None;
    if let Some(f) = &file {
        apply_all(&mut cfg, f)?;
        if f.contains_key("seed") {
            seed = Some(cfg.seed);
        }
    }
    if let Some(s) = &args.scenario {
        apply(&mut cfg, "scenario", s)?;
    }
    let overrides = [
        ("p_free", args.p_free),
        ("n_pop", args.n_pop),
        ("reps", args.reps),
        ("m", args.m),
        ("burn_in", args.burn_in),
        ("thin", args.thin),
    ];
    for (k, v) in overrides {
        if let Some(v) = v {
            apply(&mut cfg, k, &v.to_string())?;
        }
    }
    cfg.seed = match (args.seed, seed) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => env_seed()?.unwrap_or(0),
    };
    if args.threads == Some(0) {
        return Err(CliError::Usage("--threads must be positive".into()));
    }
    ensure_dir(&args.out)?;

    let methods = default_methods();
    let run = run_monte_carlo(
        &cfg.scenario,
        &methods,
        cfg.reps,
        &cfg.mi,
        cfg.seed,
        args.threads,
        args.draws,
    )?;
    let scenario_name = cfg.scenario.scenario.name();
    io::write_metrics(&args.out.join("metrics.csv"), scenario_name, &run.rows)?;

    let mut manifest = format!("tool=mibma {}\n", env!("CARGO_PKG_VERSION"));
    manifest.push_str(&cfg.manifest());
    manifest.push_str("design=poisson\n");
    manifest.push_str("interval=normal_1.96\n");
    manifest.push_str("selection_rule=median_probability\n");
    manifest.push_str("variance_divisor=R-1\n");
    let failed = run.outcomes.iter().filter(|o| !o.all_succeeded()).count();
    manifest.push_str(&format!("replications_skipped={failed}\n"));
    std::fs::write(args.out.join("manifest.txt"), manifest)
        .map_err(|e| CliError::io(&args.out, e))?;

    if args.draws {
        for o in &run.outcomes {
            let outs: Vec<(&str, &mibma_core::MIOutput)> =
                o.outputs.iter().map(|(m, out)| (m.name(), out)).collect();
            if !outs.is_empty() {
                io::write_draws_file(
                    &args.out.join(format!("draws_{}.csv", o.replication)),
                    &outs,
                )?;
            }
        }
    }
    Ok(())
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let family: Family = args.family.into();
    let data = io::read_dataset(&args.data, family)?;
    let kappa = parse_mask(args.mask.as_deref(), data.p_free(), family.has_dispersion())?;
    ensure_dir(&args.out)?;
    let fit = fit_with_sandwich(&data, &kappa, &DesignInfo::Poisson)?.require_converged()?;
    io::write_fit(&args.out.join("fit.csv"), &fit)?;
    if args.posterior {
        let full = ModelId::full(data.p_free(), family.has_dispersion())?;
        let fit_full =
            fit_with_sandwich(&data, &full, &DesignInfo::Poisson)?.require_converged()?;
        let models = enumerate_models(data.p_free(), family.has_dispersion())?;
        let priors = Priors::diffuse(data.param_dim());
        let dist = model_posterior(&fit_full, &models, &priors.param, &priors.model)?;
        io::write_posterior(&args.out.join("posterior.csv"), &dist)?;
    }
    Ok(())
}

pub fn cmd_mi(args: &MiArgs) -> Result<(), CliError> {
    if args.mode == MiMode::Single && args.mask.is_none() {
        return Err(CliError::Usage("--mode single requires --mask".into()));
    }
    let family: Family = args.family.into();
    let data = io::read_dataset(&args.data, family)?;
    let dispersion = family.has_dispersion();
    let defaults = MiConfig::default();
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let config = MiConfig {
        m: args.m.unwrap_or(defaults.m),
        burn_in: args.burn_in.unwrap_or(defaults.burn_in),
        thin: args.thin.unwrap_or(defaults.thin),
        seed,
        stream_id: 0,
    };
    if config.m < 2 {
        return Err(CliError::Usage("--m must be at least 2".into()));
    }
    if config.thin == 0 {
        return Err(CliError::Usage("--thin must be positive".into()));
    }
    let priors = Priors::diffuse(data.param_dim());
    let design = DesignInfo::Poisson;
    let out = match args.mode {
        MiMode::Single => {
            let kappa = parse_mask(args.mask.as_deref(), data.p_free(), dispersion)?;
            run_mi_single_model(&data, &kappa, &priors, &design, &config)?
        }
        MiMode::Bma => {
            let models = match args.mask.as_deref() {
                // a mask restricts the candidate set to its sub-models
                Some(m) => {
                    let top = parse_mask(Some(m), data.p_free(), dispersion)?;
                    enumerate_models(data.p_free(), dispersion)?
                        .into_iter()
                        .filter(|k| k.is_subset_of(&top))
                        .collect()
                }
                None => enumerate_models(data.p_free(), dispersion)?,
            };
            run_mi_bma(&data, &models, &priors, &design, &config)?
        }
    };
    ensure_dir(&args.out)?;
    io::write_pooled(&args.out.join("mi.csv"), &out)?;
    io::write_inclusion(&args.out.join("models.csv"), &out)?;
    io::write_draws_file(&args.out.join("draws.csv"), &[("mi", &out)])?;
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Mi(a) => cmd_mi(a),
    }
}

/// Parses `args` and runs the subcommand. Returns the process exit code:
/// 0 on success, 1 on runtime failure, 2 on usage or configuration errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
