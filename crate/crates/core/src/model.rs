//! Candidate models, the candidate set, and the priors placed on them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::stats::{log_sum_exp, normal_logpdf};

/// Largest number of selectable slots that is enumerated exhaustively.
pub const MAX_FREE_SLOTS: usize = 20;

/// Prior variance of every coefficient (and of `log σ²`) in the default prior.
pub const DIFFUSE_PRIOR_VARIANCE: f64 = 1e5;

/// A candidate model: which of the `p_free` selectable coefficients are active.
///
/// The intercept (index 0) and, for families with a dispersion parameter, the
/// trailing `log σ²` slot are always active. Bit `j - 1` of `mask` switches
/// coefficient `β_j`. Restricted coefficients are fixed at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelId {
    mask: u32,
    p_free: u8,
    dispersion: bool,
}

impl ModelId {
    pub fn new(mask: u32, p_free: usize, dispersion: bool) -> Result<Self> {
        if p_free > MAX_FREE_SLOTS {
            return Err(Error::ModelSpaceTooLarge { p_free });
        }
        if p_free < 32 && mask >> p_free != 0 {
            return Err(Error::InvalidInput("mask selects slots beyond p_free"));
        }
        Ok(Self {
            mask,
            p_free: p_free as u8,
            dispersion,
        })
    }

    pub fn full(p_free: usize, dispersion: bool) -> Result<Self> {
        let mask = if p_free == 0 { 0 } else { (1u32 << p_free) - 1 };
        Self::new(mask, p_free, dispersion)
    }

    pub fn null(p_free: usize, dispersion: bool) -> Result<Self> {
        Self::new(0, p_free, dispersion)
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn p_free(&self) -> usize {
        self.p_free as usize
    }

    pub fn has_dispersion(&self) -> bool {
        self.dispersion
    }

    /// Length of the full parameter vector.
    pub fn dim(&self) -> usize {
        1 + self.p_free() + usize::from(self.dispersion)
    }

    /// Index of the `log σ²` slot, when present.
    pub fn dispersion_index(&self) -> Option<usize> {
        self.dispersion.then(|| 1 + self.p_free())
    }

    /// Whether covariate `j` (1-based) is included.
    pub fn includes(&self, j: usize) -> bool {
        j >= 1 && j <= self.p_free() && self.mask & (1 << (j - 1)) != 0
    }

    pub fn is_active(&self, idx: usize) -> bool {
        idx == 0 || self.dispersion_index() == Some(idx) || self.includes(idx)
    }

    /// `|κ|`
    pub fn n_active(&self) -> usize {
        self.mask.count_ones() as usize + 1 + usize::from(self.dispersion)
    }

    /// `|κ̄|`
    pub fn n_restricted(&self) -> usize {
        self.p_free() - self.mask.count_ones() as usize
    }

    pub fn is_full(&self) -> bool {
        self.n_restricted() == 0
    }

    /// Same slot layout as `other`.
    pub fn compatible(&self, other: &ModelId) -> bool {
        self.p_free == other.p_free && self.dispersion == other.dispersion
    }

    pub fn is_subset_of(&self, other: &ModelId) -> bool {
        self.compatible(other) && self.mask & !other.mask == 0
    }

    pub fn with_covariate(&self, j: usize) -> Result<Self> {
        if j == 0 || j > self.p_free() {
            return Err(Error::InvalidInput("covariate index out of range"));
        }
        Self::new(self.mask | (1 << (j - 1)), self.p_free(), self.dispersion)
    }

    /// Hex rendering of the mask, e.g. `0x3`.
    pub fn to_hex(&self) -> String {
        format!("{:#x}", self.mask)
    }

    pub fn from_hex(s: &str, p_free: usize, dispersion: bool) -> Result<Self> {
        let digits = s.trim().trim_start_matches("0x").trim_start_matches("0X");
        let mask = u32::from_str_radix(digits, 16)
            .map_err(|_| Error::InvalidInput("malformed hex mask"))?;
        Self::new(mask, p_free, dispersion)
    }
}

impl core::fmt::Display for ModelId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{:#x}", self.mask)
    }
}

/// All `2^p_free` models, in increasing mask order.
pub fn enumerate_models(p_free: usize, dispersion: bool) -> Result<Vec<ModelId>> {
    if p_free > MAX_FREE_SLOTS {
        return Err(Error::ModelSpaceTooLarge { p_free });
    }
    (0..1u32 << p_free)
        .map(|mask| ModelId::new(mask, p_free, dispersion))
        .collect()
}

/// Splits the full index range into active and restricted slots, both ascending.
pub fn partition_indices(kappa: &ModelId) -> (Vec<usize>, Vec<usize>) {
    (0..kappa.dim()).partition(|&i| kappa.is_active(i))
}

/// Prior on a single parameter slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlotPrior {
    Normal { mean: f64, var: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl SlotPrior {
    pub fn logpdf(&self, x: f64) -> f64 {
        match *self {
            SlotPrior::Normal { mean, var } => normal_logpdf(x, mean, var),
            SlotPrior::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// Independent priors on every slot of the full parameter vector. Only the
/// active slots of a model contribute; restricted slots carry a point mass at
/// zero implicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPrior {
    slots: Vec<SlotPrior>,
}

impl ParamPrior {
    pub fn new(slots: Vec<SlotPrior>) -> Self {
        Self { slots }
    }

    /// `N(0, 1e5)` on every coefficient and on `log σ²`.
    pub fn diffuse(dim: usize) -> Self {
        Self::normal(dim, DIFFUSE_PRIOR_VARIANCE)
    }

    pub fn normal(dim: usize, var: f64) -> Self {
        Self {
            slots: alloc::vec![SlotPrior::Normal { mean: 0.0, var }; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.slots.len()
    }

    pub fn slot(&self, idx: usize) -> &SlotPrior {
        &self.slots[idx]
    }

    pub fn slots(&self) -> &[SlotPrior] {
        &self.slots
    }
}

/// `log p(θ_κ | κ)` for `theta_active` laid out over the active slots of `kappa`.
pub fn prior_logdensity(theta_active: &[f64], kappa: &ModelId, prior: &ParamPrior) -> Result<f64> {
    if prior.dim() != kappa.dim() {
        return Err(Error::DimensionMismatch {
            expected: kappa.dim(),
            found: prior.dim(),
        });
    }
    if theta_active.len() != kappa.n_active() {
        return Err(Error::DimensionMismatch {
            expected: kappa.n_active(),
            found: theta_active.len(),
        });
    }
    let (active, _) = partition_indices(kappa);
    Ok(active
        .iter()
        .zip(theta_active)
        .map(|(&i, &t)| prior.slot(i).logpdf(t))
        .sum())
}

/// Prior probabilities over models.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ModelPrior {
    /// `p(κ) ∝ 1` over whatever candidate set it is applied to.
    #[default]
    Uniform,
    /// Explicit normalised log-probabilities; unlisted models get zero mass.
    Explicit(Vec<(ModelId, f64)>),
}

impl ModelPrior {
    /// Normalises arbitrary positive weights given on the log scale.
    pub fn from_log_weights(entries: Vec<(ModelId, f64)>) -> Result<Self> {
        let logs: Vec<f64> = entries.iter().map(|e| e.1).collect();
        let z = log_sum_exp(&logs)?;
        Ok(ModelPrior::Explicit(
            entries.into_iter().map(|(m, w)| (m, w - z)).collect(),
        ))
    }

    /// `log p(κ)` within the candidate set `models`.
    pub fn log_prob(&self, kappa: &ModelId, models: &[ModelId]) -> f64 {
        match self {
            ModelPrior::Uniform => -(models.len() as f64).ln(),
            ModelPrior::Explicit(entries) => entries
                .iter()
                .find(|(m, _)| m == kappa)
                .map_or(f64::NEG_INFINITY, |e| e.1),
        }
    }
}
