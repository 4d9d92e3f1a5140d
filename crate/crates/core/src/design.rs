//! Design-based sandwich variance of the pseudo maximum likelihood estimator.

use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::{fit_pseudo_mle, for_each_unit, FitResult};
use crate::linalg::{Cholesky, Matrix};
use crate::model::{partition_indices, ModelId};

/// Sampling design information needed by the meat of the sandwich.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum DesignInfo {
    /// Independent Bernoulli inclusion: `π_ij = π_i π_j` for `i ≠ j`.
    #[default]
    Poisson,
    /// Explicit `n×n` joint inclusion probabilities. The diagonal is ignored
    /// and taken as `π_ii = π_i`.
    GeneralPairwise(Matrix),
}

impl DesignInfo {
    /// Restricts a pairwise design to the given units.
    pub fn subset(&self, rows: &[usize]) -> DesignInfo {
        match self {
            DesignInfo::Poisson => DesignInfo::Poisson,
            DesignInfo::GeneralPairwise(m) => DesignInfo::GeneralPairwise(m.select(rows, rows)),
        }
    }
}

/// `V̂ = A⁻¹ B A⁻ᵀ` with `A = Σ w_i l''_i` and
/// `B = Σ_i Σ_j (π_ij − π_i π_j)/π_ij · w_i l'_i w_j l'_jᵀ`, evaluated at
/// `fit.theta_hat` over the active slots and padded with zeros.
///
/// Under Poisson sampling only the diagonal survives:
/// `B = Σ_i (1 − π_i) w_i² l'_i l'_iᵀ`.
pub fn sandwich_variance(data: &Dataset, fit: &FitResult, design: &DesignInfo) -> Result<Matrix> {
    let kappa = &fit.kappa;
    let (active, _) = partition_indices(kappa);
    let theta_active: Vec<f64> = active.iter().map(|&i| fit.theta_hat[i]).collect();
    let dim = active.len();
    let mut a = Matrix::zeros(dim, dim);
    let mut b = Matrix::zeros(dim, dim);
    if let DesignInfo::GeneralPairwise(m) = design {
        if m.rows() != data.n() || m.cols() != data.n() {
            return Err(Error::DimensionMismatch {
                expected: data.n(),
                found: m.rows(),
            });
        }
    }
    // weighted scores, kept for the pairwise double sum
    let mut scores: Vec<(usize, Vec<f64>)> = Vec::new();
    let pi = data.pi();
    for_each_unit(data, kappa, &theta_active, |i, w, s, h| {
        for j in 0..dim {
            let hr = h.row(j);
            let out = a.row_mut(j);
            for l in 0..dim {
                out[l] += w * hr[l];
            }
        }
        match design {
            DesignInfo::Poisson => b.add_outer((1.0 - pi[i]) * w * w, s, s),
            DesignInfo::GeneralPairwise(_) => scores.push((i, s.iter().map(|v| w * v).collect())),
        }
    });
    if let DesignInfo::GeneralPairwise(joint) = design {
        for (i, si) in &scores {
            for (j, sj) in &scores {
                let pij = if i == j { pi[*i] } else { joint[(*i, *j)] };
                if pij <= 0.0 {
                    return Err(Error::InvalidInput(
                        "joint inclusion probabilities must be positive",
                    ));
                }
                let c = (pij - pi[*i] * pi[*j]) / pij;
                b.add_outer(c, si, sj);
            }
        }
    }
    b.symmetrize();
    a.symmetrize();
    // A is negative definite at a maximum; V = (−A)⁻¹ B (−A)⁻¹.
    let neg_a = Cholesky::new(&a.scale(-1.0)).map_err(|_| Error::SingularBread)?;
    let left = neg_a.solve_matrix(&b)?;
    let mut v = neg_a.solve_matrix(&left.transpose())?;
    v.symmetrize();
    Ok(Matrix::embed(&v, &active, kappa.dim()))
}

/// Pseudo-MLE under `kappa` with `v_hat` set to the sandwich estimate.
pub fn fit_with_sandwich(
    data: &Dataset,
    kappa: &ModelId,
    design: &DesignInfo,
) -> Result<FitResult> {
    let mut fit = fit_pseudo_mle(data, kappa)?;
    if fit.converged {
        fit.v_hat = sandwich_variance(data, &fit, design)?;
    }
    Ok(fit)
}
