//! Per-trial SPD covariances, log-Euclidean geometry and tangent-space vectors.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{ledoit_wolf_lambda, shrink};
use crate::data::{EpochSet, Label};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::{ensure_symmetric, map_eigenvalues, symmetrize};

const SYMMETRY_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted for a tangent-space base point.
pub const BASE_EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
}

impl SpdMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        ensure_symmetric(&matrix, SYMMETRY_TOL)?;
        let matrix = symmetrize(&matrix);
        let lo = SymmetricEigen::new(matrix.clone()).eigenvalues.min();
        if !(lo > 0.0) {
            return Err(Error::NotSpd(format!("minimum eigenvalue {lo:.3e}")));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn inverse(&self) -> SpdMatrix {
        Self {
            matrix: map_eigenvalues(&self.matrix, |v| 1.0 / v),
        }
    }
}

/// Upper-triangle vector of a tangent matrix, off-diagonals weighted by √2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub values: Vec<f64>,
    pub dim: usize,
}

/// `shrink(X Xᵀ / S, λ)` for an `E × S` trial.
pub fn trial_covariance(trial: &DMatrix<f64>, lambda: f64) -> Result<SpdMatrix> {
    let s = trial.ncols();
    if s < 2 {
        return Err(Error::InsufficientData(format!("{s} sample(s), need at least 2")));
    }
    let c = symmetrize(&(trial * trial.transpose() / s as f64));
    SpdMatrix::new(shrink(&c, lambda)?.matrix)
}

/// [`trial_covariance`] with the Ledoit-Wolf intensity of the trial itself.
pub fn trial_covariance_lw(trial: &DMatrix<f64>) -> Result<SpdMatrix> {
    let lambda = ledoit_wolf_lambda(std::slice::from_ref(trial))?;
    trial_covariance(trial, lambda)
}

pub fn matrix_log(a: &SpdMatrix) -> DMatrix<f64> {
    map_eigenvalues(&a.matrix, f64::ln)
}

pub fn matrix_exp(b: &DMatrix<f64>) -> Result<SpdMatrix> {
    ensure_symmetric(b, SYMMETRY_TOL)?;
    SpdMatrix::new(map_eigenvalues(b, f64::exp))
}

pub fn logeuclid_distance(a: &SpdMatrix, b: &SpdMatrix) -> f64 {
    (matrix_log(a) - matrix_log(b)).norm()
}

/// Mean of precomputed matrix logarithms, mapped back with `exp`.
pub fn logeuclid_mean_of_logs(logs: &[DMatrix<f64>]) -> Result<SpdMatrix> {
    let first = logs.first().ok_or_else(|| Error::InsufficientData("empty matrix list".into()))?;
    let e = first.nrows();
    let mut acc = DMatrix::zeros(e, e);
    for l in logs {
        if l.shape() != (e, e) {
            return Err(Error::DimensionMismatch(format!("{e}x{e} vs {}x{}", l.nrows(), l.ncols())));
        }
        acc += l;
    }
    matrix_exp(&(acc / logs.len() as f64))
}

pub fn logeuclid_mean(mats: &[SpdMatrix]) -> Result<SpdMatrix> {
    let logs: Vec<_> = mats.iter().map(matrix_log).collect();
    logeuclid_mean_of_logs(&logs)
}

/// `Log(M^{-1/2} C M^{-1/2})`.
pub fn tangent_project(c: &SpdMatrix, m: &SpdMatrix) -> Result<DMatrix<f64>> {
    if c.dim() != m.dim() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", c.dim(), m.dim())));
    }
    let eig = SymmetricEigen::new(m.matrix.clone());
    let lo = eig.eigenvalues.min();
    if lo < BASE_EIGEN_FLOOR {
        return Err(Error::NotSpd(format!("base point eigenvalue {lo:.3e} below {BASE_EIGEN_FLOOR:.0e}")));
    }
    let v = &eig.eigenvectors;
    let isqrt = v * DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x.sqrt())) * v.transpose();
    let inner = symmetrize(&(&isqrt * &c.matrix * &isqrt));
    Ok(map_eigenvalues(&inner, f64::ln))
}

pub fn uvec_weighted(s: &DMatrix<f64>) -> Result<TangentVector> {
    ensure_symmetric(s, SYMMETRY_TOL)?;
    let e = s.nrows();
    let mut values = Vec::with_capacity(e * (e + 1) / 2);
    for i in 0..e {
        values.push(s[(i, i)]);
        for j in i + 1..e {
            values.push(std::f64::consts::SQRT_2 * s[(i, j)]);
        }
    }
    Ok(TangentVector { values, dim: e })
}

/// Shrunk covariance of every trial, in trial order.
pub fn trial_covariances(set: &EpochSet) -> Result<Vec<SpdMatrix>> {
    (0..set.n_trials())
        .into_par_iter()
        .map(|t| trial_covariance_lw(&set.trial_matrix(t)))
        .collect()
}

/// Tangent-space projection at the log-Euclidean mean of the training trials.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannExtractor {
    pub pair: (Label, Label),
    pub reference: SpdMatrix,
}

impl RiemannExtractor {
    pub fn fit(train_covs: &[SpdMatrix], pair: (Label, Label)) -> Result<Self> {
        Ok(Self {
            pair,
            reference: logeuclid_mean(train_covs)?,
        })
    }

    pub fn transform(&self, covs: &[SpdMatrix], labels: &[Label]) -> Result<FeatureMatrix> {
        if covs.len() != labels.len() {
            return Err(Error::DimensionMismatch("covariances vs labels".into()));
        }
        let cols: Vec<Vec<f64>> = covs
            .par_iter()
            .map(|c| Ok(uvec_weighted(&tangent_project(c, &self.reference)?)?.values))
            .collect::<Result<_>>()?;
        let d = self.reference.dim() * (self.reference.dim() + 1) / 2;
        FeatureMatrix::new(DMatrix::from_fn(d, cols.len(), |i, j| cols[j][i]), labels.to_vec())
    }
}
