//! Normal densities, conditioning and log-space accumulation.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::rng::RngStream;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Jitter added once to the diagonal when a sampling covariance fails to factor.
pub const SAMPLING_JITTER: f64 = 1e-12;

/// A multivariate normal with a cached Cholesky factor, for repeated density
/// evaluations against the same covariance.
#[derive(Debug, Clone)]
pub struct MvnDensity {
    mu: Vec<f64>,
    chol: Cholesky,
    log_norm: f64,
}

impl MvnDensity {
    pub fn new(mu: &[f64], sigma: &Matrix) -> Result<Self> {
        if sigma.rows() != mu.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                found: sigma.rows(),
            });
        }
        let chol = Cholesky::new(sigma)?;
        let log_norm = -0.5 * (mu.len() as f64) * LN_2PI - 0.5 * chol.log_det();
        Ok(Self {
            mu: mu.to_vec(),
            chol,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn logpdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.mu.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mu.len(),
                found: x.len(),
            });
        }
        let diff: Vec<f64> = x.iter().zip(&self.mu).map(|(a, b)| a - b).collect();
        Ok(self.log_norm - 0.5 * self.chol.quad_form_inv(&diff))
    }
}

/// Log density of `N(mu, sigma)` at `x`, through the Cholesky factor.
pub fn mvn_logpdf(x: &[f64], mu: &[f64], sigma: &Matrix) -> Result<f64> {
    MvnDensity::new(mu, sigma)?.logpdf(x)
}

/// Draws `mu + L z`. A covariance that fails to factor gets one diagonal
/// jitter of 1e-12 and a semi-definite factorisation; a zero covariance
/// returns `mu` exactly.
pub fn mvn_sample(mu: &[f64], sigma: &Matrix, rng: &mut RngStream) -> Result<Vec<f64>> {
    if sigma.rows() != mu.len() || !sigma.is_square() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            found: sigma.rows(),
        });
    }
    let l = match Cholesky::new(sigma) {
        Ok(c) => c.l().clone(),
        Err(Error::NotPositiveDefinite { .. }) => Cholesky::semidefinite(sigma, SAMPLING_JITTER)?,
        Err(e) => return Err(e),
    };
    let z: Vec<f64> = (0..mu.len()).map(|_| rng.standard_normal()).collect();
    let lz = l.matvec(&z)?;
    Ok(mu.iter().zip(lz).map(|(m, d)| m + d).collect())
}

/// Conditions `N(mu, sigma)` on `x[restricted_idx] = restricted_value`.
///
/// Returns the mean and covariance of the free coordinates, in ascending index
/// order:
/// `mu_f + Σ_fr Σ_rr⁻¹ (v − mu_r)` and `Σ_ff − Σ_fr Σ_rr⁻¹ Σ_rf`.
pub fn conditional_normal(
    mu: &[f64],
    sigma: &Matrix,
    restricted_idx: &[usize],
    restricted_value: &[f64],
) -> Result<(Vec<f64>, Matrix)> {
    let n = mu.len();
    if sigma.rows() != n || sigma.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: sigma.rows(),
        });
    }
    if restricted_idx.len() != restricted_value.len() {
        return Err(Error::DimensionMismatch {
            expected: restricted_idx.len(),
            found: restricted_value.len(),
        });
    }
    if restricted_idx.is_empty() || restricted_idx.len() >= n {
        return Err(Error::InvalidInput(
            "restricted index set must be a nonempty proper subset",
        ));
    }
    let mut is_restricted = alloc::vec![false; n];
    for &i in restricted_idx {
        if i >= n || is_restricted[i] {
            return Err(Error::InvalidInput(
                "restricted indices must be distinct and in range",
            ));
        }
        is_restricted[i] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !is_restricted[i]).collect();

    let s_rr = sigma.select(restricted_idx, restricted_idx);
    let s_fr = sigma.select(&free, restricted_idx);
    let s_ff = sigma.select(&free, &free);
    let chol = Cholesky::new(&s_rr)?;

    let dev: Vec<f64> = restricted_idx
        .iter()
        .zip(restricted_value)
        .map(|(&i, &v)| v - mu[i])
        .collect();
    let shift = s_fr.matvec(&chol.solve(&dev)?)?;
    let mu_c: Vec<f64> = free.iter().zip(shift).map(|(&i, s)| mu[i] + s).collect();

    // Σ_rr⁻¹ Σ_rf
    let k = chol.solve_matrix(&s_fr.transpose())?;
    let mut sigma_c = s_ff.sub(&s_fr.matmul(&k)?)?;
    sigma_c.symmetrize();
    Ok((mu_c, sigma_c))
}

/// `log Σ exp(v_i)` with a max shift.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::InvalidInput("log_sum_exp of an empty vector"));
    }
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Err(Error::AllZeroMass);
    }
    if m == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let s: f64 = v.iter().map(|x| (x - m).exp()).sum();
    Ok(m + s.ln())
}

/// Logistic function, split by sign to avoid overflow.
#[inline]
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln()) - 0.5 * d * d / var
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// `P(a <= X <= b)` for `X ~ N(mean, sd²)`, computed from the nearer tail.
pub fn normal_interval_prob(a: f64, b: f64, mean: f64, sd: f64) -> f64 {
    let za = (a - mean) / sd;
    let zb = (b - mean) / sd;
    if za > 0.0 {
        normal_cdf(-za) - normal_cdf(-zb)
    } else {
        normal_cdf(zb) - normal_cdf(za)
    }
}
