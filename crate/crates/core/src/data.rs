use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Linear model with `log σ²` as the trailing parameter.
    Gaussian,
    /// Logistic regression on `{0, 1}` responses.
    Binomial,
}

impl Family {
    pub fn has_dispersion(self) -> bool {
        matches!(self, Family::Gaussian)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
        }
    }
}

/// A sample with survey weights and item response indicators.
///
/// Column 0 of `x` is the intercept. Entries of `y` where `delta` is false are
/// placeholders and never read by the complete-data routines.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    delta: Vec<bool>,
    pi: Vec<f64>,
    w: Vec<f64>,
    family: Family,
}

impl Dataset {
    /// Validates the inputs and derives `w_i = 1/π_i`.
    pub fn new(
        x: Matrix,
        y: Vec<f64>,
        delta: Vec<bool>,
        pi: Vec<f64>,
        family: Family,
    ) -> Result<Self> {
        let n = x.rows();
        for len in [y.len(), delta.len(), pi.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if x.cols() == 0 || n < x.cols() {
            return Err(Error::InvalidInput("need at least as many rows as columns"));
        }
        if x.row(0)[0] != 1.0 || (0..n).any(|i| x[(i, 0)] != 1.0) {
            return Err(Error::InvalidInput(
                "column 0 of the design must be the intercept",
            ));
        }
        if pi.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::InvalidInput(
                "inclusion probabilities must lie in (0, 1]",
            ));
        }
        if family == Family::Binomial
            && y.iter()
                .zip(&delta)
                .any(|(&v, &d)| d && v != 0.0 && v != 1.0)
        {
            return Err(Error::InvalidInput("binomial responses must be 0 or 1"));
        }
        if y.iter().zip(&delta).any(|(v, &d)| d && !v.is_finite()) {
            return Err(Error::InvalidInput("observed responses must be finite"));
        }
        let w = pi.iter().map(|p| 1.0 / p).collect();
        Ok(Self {
            x,
            y,
            delta,
            pi,
            w,
            family,
        })
    }

    /// Fully observed data with unit inclusion probabilities.
    pub fn unweighted(x: Matrix, y: Vec<f64>, family: Family) -> Result<Self> {
        let n = y.len();
        Self::new(x, y, alloc::vec![true; n], alloc::vec![1.0; n], family)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    /// Number of design columns including the intercept.
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn p_free(&self) -> usize {
        self.x.cols() - 1
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Full parameter dimension for this dataset's family.
    pub fn param_dim(&self) -> usize {
        self.p() + usize::from(self.family.has_dispersion())
    }

    pub fn n_missing(&self) -> usize {
        self.delta.iter().filter(|d| !**d).count()
    }

    pub fn missing_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.delta[i]).collect()
    }

    /// Rows with `delta = 1`.
    pub fn complete_cases(&self) -> Result<Self> {
        let keep: Vec<usize> = (0..self.n()).filter(|&i| self.delta[i]).collect();
        self.subset(&keep)
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let cols: Vec<usize> = (0..self.p()).collect();
        let x = self.x.select(rows, &cols);
        let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let delta = rows.iter().map(|&i| self.delta[i]).collect();
        Self::new(x, pick(&self.y), delta, pick(&self.pi), self.family)
    }

    /// Same units with a filled response vector. Observed entries must match.
    pub fn with_completed(&self, completed_y: &[f64]) -> Result<Self> {
        if completed_y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: completed_y.len(),
            });
        }
        let mut out = self.clone();
        out.y.copy_from_slice(completed_y);
        out.delta.iter_mut().for_each(|d| *d = true);
        Ok(out)
    }

    /// Replaces inclusion probabilities (and weights).
    pub fn with_pi(&self, pi: Vec<f64>) -> Result<Self> {
        Self::new(
            self.x.clone(),
            self.y.clone(),
            self.delta.clone(),
            pi,
            self.family,
        )
    }

    /// Scales every weight by `s > 0`, keeping `π` untouched. Used to check
    /// argmax invariance; the result no longer satisfies `w = 1/π`.
    #[doc(hidden)]
    pub fn with_scaled_weights(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.w.iter_mut().for_each(|w| *w *= s);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy() -> Dataset {
        let x = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]]).unwrap();
        Dataset::new(
            x,
            vec![1.0, f64::NAN, 3.0],
            vec![true, false, true],
            vec![0.5, 0.25, 1.0],
            Family::Gaussian,
        )
        .unwrap()
    }

    #[test]
    fn weights_are_reciprocal() {
        let d = toy();
        assert_eq!(d.w(), &[2.0, 4.0, 1.0]);
        assert_eq!(d.n_missing(), 1);
        assert_eq!(d.param_dim(), 3);
    }

    #[test]
    fn complete_cases_drops_missing() {
        let cc = toy().complete_cases().unwrap();
        assert_eq!(cc.y(), &[1.0, 3.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(Dataset::new(
            x.clone(),
            vec![0.0, 2.0],
            vec![true; 2],
            vec![1.0; 2],
            Family::Binomial
        )
        .is_err());
        assert!(Dataset::new(
            x.clone(),
            vec![0.0, 1.0],
            vec![true; 2],
            vec![0.0, 1.0],
            Family::Binomial
        )
        .is_err());
        let no_intercept = Matrix::from_rows(&[[2.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(Dataset::unweighted(no_intercept, vec![0.0, 1.0], Family::Gaussian).is_err());
    }
}
