//! Survey-weighted (pseudo) maximum likelihood for Gaussian linear and
//! logistic models, optionally under a model's zero restrictions.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::data::{Dataset, Family};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::model::{partition_indices, ModelId};
use crate::stats::{expit, log1p_exp, LN_2PI};

pub const SCORE_TOL: f64 = 1e-8;
pub const MAX_NEWTON_ITERS: usize = 50;
pub const MAX_HALVINGS: usize = 30;
/// Any logistic coefficient beyond this magnitude is taken as separation.
pub const SEPARATION_BOUND: f64 = 30.0;
pub const MIN_DISPERSION: f64 = 1e-12;

/// Estimates padded to the full parameter dimension.
///
/// `v_hat` is the model-based inverse of the negated weighted Hessian as
/// returned by [`fit_pseudo_mle`]; [`crate::design::fit_with_sandwich`]
/// replaces it with the design-based sandwich estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    pub v_hat: Matrix,
    pub kappa: ModelId,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
            })
        }
    }

    pub fn active_theta(&self) -> Vec<f64> {
        partition_indices(&self.kappa)
            .0
            .iter()
            .map(|&i| self.theta_hat[i])
            .collect()
    }

    pub fn active_v(&self) -> Matrix {
        let (active, _) = partition_indices(&self.kappa);
        self.v_hat.select(&active, &active)
    }

    pub fn std_errors(&self) -> Vec<f64> {
        self.v_hat
            .diag()
            .into_iter()
            .map(|v| v.max(0.0).sqrt())
            .collect()
    }
}

/// Score and Hessian of one unit's log-density over the active slots.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitDerivatives {
    pub score: Vec<f64>,
    pub hessian: Matrix,
}

/// Columns of `x` that carry active coefficients, in slot order.
pub(crate) fn active_columns(kappa: &ModelId) -> Vec<usize> {
    (0..=kappa.p_free())
        .filter(|&j| kappa.is_active(j))
        .collect()
}

fn check_layout(data: &Dataset, kappa: &ModelId) -> Result<()> {
    if kappa.p_free() != data.p_free() || kappa.has_dispersion() != data.family().has_dispersion() {
        return Err(Error::InvalidInput(
            "model layout does not match the dataset",
        ));
    }
    Ok(())
}

/// Log-density of one unit plus its derivatives with respect to the active
/// parameters `(β_active[, log σ²])`. `xa` holds the active covariates.
#[inline]
fn unit_terms(
    family: Family,
    xa: &[f64],
    y: f64,
    beta: &[f64],
    log_s2: f64,
    score: &mut [f64],
    hess: &mut Matrix,
) -> f64 {
    let k = xa.len();
    let eta: f64 = xa.iter().zip(beta).map(|(a, b)| a * b).sum();
    match family {
        Family::Gaussian => {
            let s2 = log_s2.exp();
            let r = y - eta;
            for j in 0..k {
                score[j] = xa[j] * r / s2;
                for l in 0..k {
                    hess[(j, l)] = -xa[j] * xa[l] / s2;
                }
                hess[(j, k)] = -xa[j] * r / s2;
                hess[(k, j)] = hess[(j, k)];
            }
            score[k] = -0.5 + r * r / (2.0 * s2);
            hess[(k, k)] = -r * r / (2.0 * s2);
            -0.5 * (LN_2PI + log_s2) - r * r / (2.0 * s2)
        }
        Family::Binomial => {
            let p = expit(eta);
            let v = p * (1.0 - p);
            for j in 0..k {
                score[j] = xa[j] * (y - p);
                for l in 0..k {
                    hess[(j, l)] = -v * xa[j] * xa[l];
                }
            }
            y * eta - log1p_exp(eta)
        }
    }
}

/// Walks the observed units, handing each one's weight, score and Hessian to
/// `f`. `theta_active` is laid out over the active slots. Returns the weighted
/// log-likelihood.
pub(crate) fn for_each_unit(
    data: &Dataset,
    kappa: &ModelId,
    theta_active: &[f64],
    mut f: impl FnMut(usize, f64, &[f64], &Matrix),
) -> f64 {
    let cols = active_columns(kappa);
    let kb = cols.len();
    let dim = kappa.n_active();
    let beta = &theta_active[..kb];
    let log_s2 = if kappa.has_dispersion() {
        theta_active[kb]
    } else {
        0.0
    };
    let mut xa = vec![0.0; kb];
    let mut score = vec![0.0; dim];
    let mut hess = Matrix::zeros(dim, dim);
    let mut ll = 0.0;
    for i in 0..data.n() {
        if !data.delta()[i] {
            continue;
        }
        let row = data.x().row(i);
        for (a, &c) in xa.iter_mut().zip(&cols) {
            *a = row[c];
        }
        let w = data.w()[i];
        ll += w * unit_terms(
            data.family(),
            &xa,
            data.y()[i],
            beta,
            log_s2,
            &mut score,
            &mut hess,
        );
        f(i, w, &score, &hess);
    }
    ll
}

/// Per-unit scores and Hessians over the active slots of `kappa`, for every
/// unit with an observed response.
pub fn score_hessian(
    data: &Dataset,
    theta: &[f64],
    kappa: &ModelId,
) -> Result<Vec<UnitDerivatives>> {
    check_layout(data, kappa)?;
    if theta.len() != kappa.dim() {
        return Err(Error::DimensionMismatch {
            expected: kappa.dim(),
            found: theta.len(),
        });
    }
    let (active, _) = partition_indices(kappa);
    let theta_active: Vec<f64> = active.iter().map(|&i| theta[i]).collect();
    let mut out = Vec::new();
    for_each_unit(data, kappa, &theta_active, |_, _, s, h| {
        out.push(UnitDerivatives {
            score: s.to_vec(),
            hessian: h.clone(),
        });
    });
    Ok(out)
}

/// Weighted score `Σ w_i l'_i`, weighted Hessian `Σ w_i l''_i` and the
/// weighted log-likelihood at `theta_active`.
pub(crate) fn weighted_totals(
    data: &Dataset,
    kappa: &ModelId,
    theta_active: &[f64],
) -> (Vec<f64>, Matrix, f64) {
    let dim = kappa.n_active();
    let mut g = vec![0.0; dim];
    let mut h = Matrix::zeros(dim, dim);
    let ll = for_each_unit(data, kappa, theta_active, |_, w, s, hi| {
        for j in 0..dim {
            g[j] += w * s[j];
            let hr = hi.row(j);
            let out = h.row_mut(j);
            for l in 0..dim {
                out[l] += w * hr[l];
            }
        }
    });
    (g, h, ll)
}

fn model_based_variance(hess: &Matrix) -> Option<Matrix> {
    Cholesky::new(&hess.scale(-1.0)).ok().map(|c| c.inverse())
}

/// Maximises `Σ w_i log f(y_i | x_i; θ_κ)` over the active slots of `kappa`
/// using the units with an observed response.
///
/// Gaussian fits are closed form (weighted least squares, then
/// `σ̂² = Σ w r² / Σ w`). Logistic fits run Newton–Raphson with step halving and
/// report `converged = false` after 50 iterations or on separation.
pub fn fit_pseudo_mle(data: &Dataset, kappa: &ModelId) -> Result<FitResult> {
    check_layout(data, kappa)?;
    let n_obs = data.delta().iter().filter(|d| **d).count();
    if n_obs < kappa.n_active() {
        return Err(Error::InvalidInput(
            "fewer observed units than active parameters",
        ));
    }
    let (theta_active, converged, iterations) = match data.family() {
        Family::Gaussian => (fit_gaussian(data, kappa)?, true, 1),
        Family::Binomial => fit_logistic(data, kappa)?,
    };
    let (_, hess, loglik) = weighted_totals(data, kappa, &theta_active);
    let (active, _) = partition_indices(kappa);
    let mut theta_hat = vec![0.0; kappa.dim()];
    for (&i, &t) in active.iter().zip(&theta_active) {
        theta_hat[i] = t;
    }
    let v_active =
        model_based_variance(&hess).unwrap_or_else(|| Matrix::zeros(active.len(), active.len()));
    let v_hat = Matrix::embed(&v_active, &active, kappa.dim());
    Ok(FitResult {
        theta_hat,
        v_hat,
        kappa: *kappa,
        loglik,
        converged,
        iterations,
    })
}

fn fit_gaussian(data: &Dataset, kappa: &ModelId) -> Result<Vec<f64>> {
    let cols = active_columns(kappa);
    let k = cols.len();
    let mut xtwx = Matrix::zeros(k, k);
    let mut xtwy = vec![0.0; k];
    let mut xa = vec![0.0; k];
    for i in 0..data.n() {
        if !data.delta()[i] {
            continue;
        }
        let row = data.x().row(i);
        for (a, &c) in xa.iter_mut().zip(&cols) {
            *a = row[c];
        }
        let w = data.w()[i];
        xtwx.add_outer(w, &xa, &xa);
        for (t, a) in xtwy.iter_mut().zip(&xa) {
            *t += w * a * data.y()[i];
        }
    }
    xtwx.symmetrize();
    let chol = Cholesky::new(&xtwx).map_err(|_| Error::SingularDesign)?;
    let beta = chol.solve(&xtwy)?;

    let (mut rss, mut sw) = (0.0, 0.0);
    for i in 0..data.n() {
        if !data.delta()[i] {
            continue;
        }
        let row = data.x().row(i);
        let fitted: f64 = cols.iter().zip(&beta).map(|(&c, b)| row[c] * b).sum();
        let r = data.y()[i] - fitted;
        rss += data.w()[i] * r * r;
        sw += data.w()[i];
    }
    let sigma2 = rss / sw;
    if sigma2 < MIN_DISPERSION {
        return Err(Error::SingularDispersion { sigma2 });
    }
    let mut theta = beta;
    theta.push(sigma2.ln());
    Ok(theta)
}

fn fit_logistic(data: &Dataset, kappa: &ModelId) -> Result<(Vec<f64>, bool, usize)> {
    let k = kappa.n_active();
    let mut beta = vec![0.0; k];
    let (mut g, mut h, mut ll) = weighted_totals(data, kappa, &beta);
    for iter in 0..MAX_NEWTON_ITERS {
        let neg_h = h.scale(-1.0);
        let step = match Cholesky::new(&neg_h) {
            Ok(c) => c.solve(&g)?,
            Err(_) if iter == 0 => return Err(Error::SingularDesign),
            // curvature vanished along the path: quasi-separation
            Err(_) => return Ok((beta, false, iter)),
        };
        // Under separation the score decays while the Newton step does not.
        let small_step = step
            .iter()
            .zip(&beta)
            .all(|(d, b)| d.abs() <= 1e-6 * (1.0 + b.abs()));
        if g.iter().all(|v| v.abs() < SCORE_TOL) && small_step {
            return Ok((beta, true, iter));
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, d)| b + t * d).collect();
            let (g2, h2, ll2) = weighted_totals(data, kappa, &cand);
            if ll2.is_finite() && ll2 >= ll - 1e-12 * ll.abs().max(1.0) {
                accepted = Some((cand, g2, h2, ll2));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, g2, h2, ll2)) = accepted else {
            return Ok((beta, false, iter + 1));
        };
        let moved = step
            .iter()
            .zip(&beta)
            .all(|(d, b)| (t * d).abs() <= 1e-13 * (1.0 + b.abs()));
        beta = cand;
        g = g2;
        h = h2;
        ll = ll2;
        if beta.iter().any(|b| b.abs() > SEPARATION_BOUND) {
            return Ok((beta, false, iter + 1));
        }
        if moved {
            // step below rounding: the score cannot be reduced further
            return Ok((beta, true, iter + 1));
        }
    }
    let converged = g.iter().all(|v| v.abs() < SCORE_TOL);
    Ok((beta, converged, MAX_NEWTON_ITERS))
}
