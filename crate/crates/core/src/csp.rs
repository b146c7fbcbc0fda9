//! One-vs-one common spatial patterns.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::covariance::CovEstimate;
use crate::data::Label;
use crate::error::{Error, Result};
use crate::linalg::{map_eigenvalues, min_eigenvalue, sorted_eigen};
use crate::persist::{expect_len, read_blob, write_blob};

/// Default filter count: 12 for dense montages, all channels otherwise.
pub fn default_filter_count(n_channels: usize) -> usize {
    if n_channels > 16 {
        12
    } else {
        n_channels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CspModel {
    pub pair: (Label, Label),
    /// `E × F`, one filter per column.
    pub filters: DMatrix<f64>,
    /// Generalized eigenvalue of each kept filter, in filter order.
    pub eigenvalues: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CspHeader {
    kind: String,
    pair: (Label, Label),
    channels: usize,
    filters: usize,
}

impl CspModel {
    pub fn n_channels(&self) -> usize {
        self.filters.nrows()
    }

    pub fn n_filters(&self) -> usize {
        self.filters.ncols()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = CspHeader {
            kind: "csp".into(),
            pair: self.pair,
            channels: self.n_channels(),
            filters: self.n_filters(),
        };
        let mut payload = self.filters.as_slice().to_vec();
        payload.extend_from_slice(&self.eigenvalues);
        write_blob(&header, &payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, mut payload): (CspHeader, _) = read_blob(bytes)?;
        if h.kind != "csp" {
            return Err(Error::MalformedHeader("not a CSP model".into()));
        }
        expect_len(&payload, h.channels * h.filters + h.filters)?;
        let eigenvalues = payload.split_off(h.channels * h.filters);
        Ok(Self {
            pair: h.pair,
            filters: DMatrix::from_vec(h.channels, h.filters, payload),
            eigenvalues,
        })
    }
}

fn ensure_spd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let lo = min_eigenvalue(m);
    if !(lo > 0.0) {
        return Err(Error::NotSpd(format!("{what}: minimum eigenvalue {lo:.3e}")));
    }
    Ok(())
}

/// Solves `Ca w = μ (Ca + Cb) w` and keeps the `f/2` largest and `f/2`
/// smallest `μ`. When `f` equals the channel count every filter is kept, so
/// odd `f` is allowed only in that case.
pub fn csp_fit(ca: &CovEstimate, cb: &CovEstimate, f: usize, pair: (Label, Label)) -> Result<CspModel> {
    let e = ca.dim();
    if cb.dim() != e {
        return Err(Error::DimensionMismatch(format!("class covariances are {e}x{e} and {0}x{0}", cb.dim())));
    }
    if f == 0 || f > e {
        return Err(Error::InvalidArgument(format!("{f} filters requested from {e} channels")));
    }
    if f % 2 == 1 && f != e {
        return Err(Error::InvalidArgument(format!("filter count {f} must be even")));
    }
    ensure_spd(&ca.matrix, "first class covariance")?;
    ensure_spd(&cb.matrix, "second class covariance")?;

    let composite = &ca.matrix + &cb.matrix;
    let whiten = map_eigenvalues(&composite, |v| 1.0 / v.sqrt());
    let (mu, v) = sorted_eigen(&(&whiten * &ca.matrix * &whiten));
    let full = &whiten * v;

    let keep: Vec<usize> = if f == e {
        (0..e).collect()
    } else {
        (0..f / 2).chain(e - f / 2..e).collect()
    };
    let mut filters = DMatrix::zeros(e, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        let mut w = full.column(src).into_owned();
        let scale = (w.transpose() * &composite * &w)[(0, 0)].sqrt();
        w /= scale;
        let imax = w.iamax();
        if w[imax] < 0.0 {
            w = -w;
        }
        filters.set_column(dst, &w);
    }
    Ok(CspModel {
        pair,
        filters,
        eigenvalues: keep.iter().map(|&i| mu[i]).collect(),
    })
}

/// `Wᵀ X` for an `E × S` trial.
pub fn csp_apply(model: &CspModel, trial: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if trial.nrows() != model.n_channels() {
        return Err(Error::DimensionMismatch(format!(
            "trial has {} channels, model expects {}",
            trial.nrows(),
            model.n_channels()
        )));
    }
    Ok(model.filters.transpose() * trial)
}
