//! Simulation scenarios: superpopulation, finite population, Poisson samples
//! with inclusion probabilities driven by the response, and item nonresponse
//! driven by the first covariate.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::data::{Dataset, Family};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::ModelId;
use crate::rng::RngStream;
use crate::stats::expit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Gaussian linear response.
    I,
    /// Binary logistic response.
    II,
}

impl Scenario {
    pub fn family(self) -> Family {
        match self {
            Scenario::I => Family::Gaussian,
            Scenario::II => Family::Binomial,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::I => "I",
            Scenario::II => "II",
        }
    }
}

/// Generating parameters of a scenario.
///
/// Sampling is Poisson with `logit(1 − π_i) = sampling.0 + sampling.1 · y_i`;
/// an intercept of `−∞` gives a census. The response indicator follows
/// `logit(ψ_i) = response.0 + response.1 · x_{i1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n_pop: usize,
    pub p_free: usize,
    /// `(β₀, β₁, …, β_{p_free})`.
    pub beta: Vec<f64>,
    /// Error variance (Scenario I only).
    pub sigma2: f64,
    pub x_mean: f64,
    pub x_var: f64,
    pub response: (f64, f64),
    pub sampling: (f64, f64),
    pub seed: u64,
}

impl ScenarioConfig {
    /// Full-scale settings: `N = 30000`, twelve candidate covariates.
    pub fn full_scale(scenario: Scenario) -> Self {
        Self::with_size(scenario, 30_000, 12)
    }

    /// Reduced settings: `N = 5000`, six candidate covariates.
    pub fn desk(scenario: Scenario) -> Self {
        Self::with_size(scenario, 5000, 6)
    }

    pub fn with_size(scenario: Scenario, n_pop: usize, p_free: usize) -> Self {
        let mut beta = vec![0.0; p_free + 1];
        beta[0] = -0.5;
        if p_free >= 1 {
            beta[1] = 1.0;
        }
        match scenario {
            Scenario::I => Self {
                scenario,
                n_pop,
                p_free,
                beta,
                sigma2: 1.0,
                x_mean: 2.0,
                x_var: 2.0,
                response: (0.2, 0.1),
                sampling: (4.5, -0.2),
                seed: 0,
            },
            Scenario::II => Self {
                scenario,
                n_pop,
                p_free,
                beta,
                sigma2: 0.0,
                x_mean: 1.0,
                x_var: 2.0,
                response: (0.2, 0.2),
                sampling: (4.4, -0.3),
                seed: 0,
            },
        }
    }

    pub fn family(&self) -> Family {
        self.scenario.family()
    }

    /// The generating model: covariates with nonzero coefficients.
    pub fn true_model(&self) -> Result<ModelId> {
        let mask = (1..=self.p_free)
            .filter(|&j| self.beta[j] != 0.0)
            .fold(0u32, |m, j| m | 1 << (j - 1));
        ModelId::new(mask, self.p_free, self.family().has_dispersion())
    }

    /// True full parameter vector in the estimation layout.
    pub fn true_theta(&self) -> Vec<f64> {
        let mut t = self.beta.clone();
        if self.family().has_dispersion() {
            t.push(self.sigma2.ln());
        }
        t
    }

    /// `P(I_i = 1 | y_i)`.
    pub fn inclusion_prob(&self, y: f64) -> f64 {
        expit(-(self.sampling.0 + self.sampling.1 * y))
    }

    /// `P(δ_i = 1 | x_{i1})`.
    pub fn response_prob(&self, x1: f64) -> f64 {
        expit(self.response.0 + self.response.1 * x1)
    }

    fn validate(&self) -> Result<()> {
        if self.beta.len() != self.p_free + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.p_free + 1,
                found: self.beta.len(),
            });
        }
        if self.p_free == 0 {
            return Err(Error::InvalidInput("scenarios need at least one covariate"));
        }
        if !(self.x_var >= 0.0) || !(self.sigma2 >= 0.0) {
            return Err(Error::InvalidInput("variances must be nonnegative"));
        }
        Ok(())
    }

    /// One superpopulation unit: design row (with intercept) and response.
    fn draw_unit(&self, row: &mut [f64], rng: &mut RngStream) -> f64 {
        let sd = self.x_var.sqrt();
        row[0] = 1.0;
        for v in &mut row[1..] {
            *v = self.x_mean + sd * rng.standard_normal();
        }
        let eta: f64 = row.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
        match self.scenario {
            Scenario::I => eta + self.sigma2.sqrt() * rng.standard_normal(),
            Scenario::II => f64::from(u8::from(rng.bernoulli(expit(eta)))),
        }
    }
}

/// A finite population drawn from the superpopulation model.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    /// `N × (1 + p_free)` with the intercept in column 0.
    pub x: Matrix,
    pub y: Vec<f64>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

pub fn generate_population(cfg: &ScenarioConfig, rng: &mut RngStream) -> Result<Population> {
    cfg.validate()?;
    let p = cfg.p_free + 1;
    let mut x = Matrix::zeros(cfg.n_pop, p);
    let mut y = Vec::with_capacity(cfg.n_pop);
    for i in 0..cfg.n_pop {
        y.push(cfg.draw_unit(x.row_mut(i), rng));
    }
    Ok(Population { x, y })
}

/// Builds a dataset from selected rows with their inclusion probabilities and
/// fresh response indicators. Nonrespondents keep their generated response so
/// the missingness mechanism can be inspected; estimation never reads it.
fn assemble(
    cfg: &ScenarioConfig,
    rows: Vec<Vec<f64>>,
    y: Vec<f64>,
    rng: &mut RngStream,
) -> Result<Dataset> {
    let pi: Vec<f64> = y.iter().map(|&v| cfg.inclusion_prob(v)).collect();
    let delta: Vec<bool> = rows
        .iter()
        .map(|r| rng.bernoulli(cfg.response_prob(r[1])))
        .collect();
    let x = Matrix::from_vec(rows.len(), cfg.p_free + 1, rows.concat())?;
    Dataset::new(x, y, delta, pi, cfg.family())
}

/// Poisson sample `I_i ~ Bernoulli(π_i)` from `population`, then
/// `δ_i ~ Bernoulli(ψ_i)` for the sampled units. An empty draw is retried once.
pub fn draw_sample(
    population: &Population,
    cfg: &ScenarioConfig,
    rng: &mut RngStream,
) -> Result<Dataset> {
    cfg.validate()?;
    if population.x.cols() != cfg.p_free + 1 {
        return Err(Error::DimensionMismatch {
            expected: cfg.p_free + 1,
            found: population.x.cols(),
        });
    }
    for _ in 0..2 {
        let selected: Vec<usize> = (0..population.len())
            .filter(|&i| rng.bernoulli(cfg.inclusion_prob(population.y[i])))
            .collect();
        if selected.is_empty() {
            continue;
        }
        let rows = selected
            .iter()
            .map(|&i| population.x.row(i).to_vec())
            .collect();
        let y = selected.iter().map(|&i| population.y[i]).collect();
        return assemble(cfg, rows, y, rng);
    }
    Err(Error::EmptySample)
}

/// A sample of exactly `n` units with the same informative inclusion law,
/// obtained by drawing superpopulation units and keeping each with
/// probability `π_i` until `n` are kept. With `with_missing = false` every
/// response is observed.
pub fn informative_sample(
    cfg: &ScenarioConfig,
    n: usize,
    with_missing: bool,
    rng: &mut RngStream,
) -> Result<Dataset> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut row = vec![0.0; cfg.p_free + 1];
    while rows.len() < n {
        let v = cfg.draw_unit(&mut row, rng);
        if rng.bernoulli(cfg.inclusion_prob(v)) {
            rows.push(row.clone());
            y.push(v);
        }
    }
    let data = assemble(cfg, rows, y, rng)?;
    if with_missing {
        Ok(data)
    } else {
        Dataset::new(
            data.x().clone(),
            data.y().to_vec(),
            vec![true; n],
            data.pi().to_vec(),
            cfg.family(),
        )
    }
}
