//! Minimum distance to the log-Euclidean class means.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::riemann::{matrix_log, SpdMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct MdmModel {
    /// Matrix logarithms of the positive and negative class means.
    pub log_means: [DMatrix<f64>; 2],
}

impl MdmModel {
    /// Distances from `x` to the two means.
    pub fn distances(&self, x: &SpdMatrix) -> [f64; 2] {
        let l = matrix_log(x);
        [(&l - &self.log_means[0]).norm(), (&l - &self.log_means[1]).norm()]
    }

    /// `δ(x, M₂) − δ(x, M₁)`; zero counts for the first class.
    pub fn decision(&self, x: &SpdMatrix) -> f64 {
        let [d1, d2] = self.distances(x);
        d2 - d1
    }

    /// Fits from per-class matrix logarithms.
    pub fn from_logs(first: &[DMatrix<f64>], second: &[DMatrix<f64>]) -> Result<Self> {
        Ok(Self {
            log_means: [mean_log(first)?, mean_log(second)?],
        })
    }
}

fn mean_log(logs: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let first = logs.first().ok_or_else(|| Error::InsufficientData("MDM needs both classes".into()))?;
    let mut acc = DMatrix::zeros(first.nrows(), first.ncols());
    for l in logs {
        if l.shape() != first.shape() {
            return Err(Error::DimensionMismatch("covariance sizes differ".into()));
        }
        acc += l;
    }
    Ok(acc / logs.len() as f64)
}
