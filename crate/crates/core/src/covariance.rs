//! Class covariances and Ledoit-Wolf shrinkage toward a scaled identity.

use nalgebra::DMatrix;

use crate::data::{EpochSet, Label};
use crate::error::{Error, Result};
use crate::linalg::{ensure_symmetric, symmetrize};

const SYMMETRY_TOL: f64 = 1e-10;

/// Shrunk covariance estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CovEstimate {
    pub matrix: DMatrix<f64>,
    pub lambda: f64,
    pub n_trials: usize,
}

impl CovEstimate {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Sum of `X Xᵀ` over the class's trials, divided by the trial count.
pub fn class_covariance(set: &EpochSet, label: Label) -> Result<DMatrix<f64>> {
    let idx = set.indices_of(label);
    if idx.is_empty() {
        return Err(Error::InsufficientData(format!("no trials of class {label}")));
    }
    let e = set.n_channels();
    let mut c = DMatrix::zeros(e, e);
    for &t in &idx {
        let x = set.trial_matrix(t);
        c.gemm(1.0, &x, &x.transpose(), 1.0);
    }
    Ok(symmetrize(&(c / idx.len() as f64)))
}

/// Ledoit-Wolf optimal shrinkage intensity, treating every column of every
/// trial as one zero-mean observation.
pub fn ledoit_wolf_lambda(trials: &[DMatrix<f64>]) -> Result<f64> {
    let p = match trials.first() {
        Some(t) => t.nrows(),
        None => return Err(Error::InsufficientData("no observations".into())),
    };
    if trials.iter().any(|t| t.nrows() != p) {
        return Err(Error::DimensionMismatch("trials differ in channel count".into()));
    }
    let n: usize = trials.iter().map(|t| t.ncols()).sum();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} observation(s), need at least 2")));
    }
    let nf = n as f64;
    let pf = p as f64;
    let mut gram = DMatrix::zeros(p, p);
    // Σ_k (Σ_i x_ki²)², i.e. the grand sum of (X∘X)ᵀ(X∘X)
    let mut beta_raw = 0.0;
    for t in trials {
        gram.gemm(1.0, t, &t.transpose(), 1.0);
        for col in t.column_iter() {
            beta_raw += col.norm_squared().powi(2);
        }
    }
    let emp = &gram / nf;
    let trace = emp.trace();
    let mu = trace / pf;
    let delta_raw = emp.norm_squared();
    let delta = (delta_raw - 2.0 * mu * trace + pf * mu * mu) / pf;
    let beta = (beta_raw / nf - delta_raw) / (pf * nf);
    if delta <= 0.0 {
        return Ok(0.0);
    }
    Ok((beta.min(delta) / delta).clamp(0.0, 1.0))
}

/// `(1 − λ)C + λνI` with `ν = tr(C)/E`.
pub fn shrink(c: &DMatrix<f64>, lambda: f64) -> Result<CovEstimate> {
    ensure_symmetric(c, SYMMETRY_TOL)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("shrinkage {lambda} outside [0, 1]")));
    }
    let e = c.nrows();
    let nu = c.trace() / e as f64;
    let matrix = symmetrize(c) * (1.0 - lambda) + DMatrix::identity(e, e) * (lambda * nu);
    Ok(CovEstimate {
        matrix,
        lambda,
        n_trials: 0,
    })
}

/// Class covariance shrunk with the Ledoit-Wolf intensity of that class's data.
pub fn shrunk_class_covariance(set: &EpochSet, label: Label) -> Result<CovEstimate> {
    let c = class_covariance(set, label)?;
    let trials: Vec<DMatrix<f64>> = set.indices_of(label).into_iter().map(|t| set.trial_matrix(t)).collect();
    let lambda = ledoit_wolf_lambda(&trials)?;
    let mut est = shrink(&c, lambda)?;
    est.n_trials = trials.len();
    Ok(est)
}
