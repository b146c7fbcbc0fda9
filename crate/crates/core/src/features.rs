//! Wavelet log-variance features of CSP-filtered trials.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::shrunk_class_covariance;
use crate::csp::{csp_apply, csp_fit, default_filter_count, CspModel};
use crate::data::{EpochSet, Label};
use crate::error::{Error, Result};
use crate::persist::{expect_len, read_blob, write_blob};
use crate::wavelet::{dwt, WaveletFamily, WaveletSpec};

pub const LOG_VARIANCE_FLOOR: f64 = 1e-300;

/// Which coefficients feed the log-variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveletBand {
    /// Deepest approximation band.
    #[default]
    Approx,
    /// Deepest approximation and deepest detail, pooled.
    ApproxDetail,
}

/// Decomposition depth by acquisition rate: 2 at 125 Hz, 3 at 250 Hz.
pub fn default_level(sample_rate: f64) -> usize {
    if sample_rate >= 200.0 {
        3
    } else {
        2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// `F × n_trials`.
    pub values: DMatrix<f64>,
    pub labels: Vec<Label>,
}

#[derive(Serialize, Deserialize)]
struct FeatureHeader {
    kind: String,
    features: usize,
    trials: usize,
    labels: Vec<Label>,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>, labels: Vec<Label>) -> Result<Self> {
        if values.ncols() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature columns for {} labels",
                values.ncols(),
                labels.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("non-finite feature".into()));
        }
        Ok(Self { values, labels })
    }

    pub fn n_features(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_trials(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.values.column(i).iter().copied().collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let h = FeatureHeader {
            kind: "features".into(),
            features: self.n_features(),
            trials: self.n_trials(),
            labels: self.labels.clone(),
        };
        write_blob(&h, self.values.as_slice())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, payload): (FeatureHeader, _) = read_blob(bytes)?;
        if h.kind != "features" {
            return Err(Error::MalformedHeader("not a feature matrix".into()));
        }
        expect_len(&payload, h.features * h.trials)?;
        Self::new(DMatrix::from_vec(h.features, h.trials, payload), h.labels)
    }
}

fn log_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.max(LOG_VARIANCE_FLOOR).ln()
}

/// Features of one `E × S` trial.
pub fn trial_features(model: &CspModel, trial: &DMatrix<f64>, spec: WaveletSpec, band: WaveletBand) -> Result<Vec<f64>> {
    let z = csp_apply(model, trial)?;
    (0..z.nrows())
        .map(|f| {
            let row: Vec<f64> = z.row(f).iter().copied().collect();
            let dec = dwt(&row, spec)?;
            Ok(match band {
                WaveletBand::Approx => log_variance(&dec.approx),
                WaveletBand::ApproxDetail => {
                    let mut pooled = dec.approx.clone();
                    pooled.extend_from_slice(dec.deepest_detail());
                    log_variance(&pooled)
                }
            })
        })
        .collect()
}

pub fn feature_matrix(set: &EpochSet, model: &CspModel, spec: WaveletSpec, band: WaveletBand) -> Result<FeatureMatrix> {
    let (a, b) = model.pair;
    if let Some(l) = set.labels().iter().find(|&&l| l != a && l != b) {
        return Err(Error::InvalidArgument(format!("trial of class {l} outside pair {a}/{b}")));
    }
    let cols: Vec<Vec<f64>> = (0..set.n_trials())
        .into_par_iter()
        .map(|t| trial_features(model, &set.trial_matrix(t), spec, band))
        .collect::<Result<_>>()?;
    let f = model.n_filters();
    let values = DMatrix::from_fn(f, cols.len(), |i, j| cols[j][i]);
    FeatureMatrix::new(values, set.labels().to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CspWdConfig {
    /// `None` picks [`default_filter_count`].
    pub n_filters: Option<usize>,
    pub wavelet: WaveletFamily,
    /// `None` picks [`default_level`].
    pub level: Option<usize>,
    pub band: WaveletBand,
}

impl Default for CspWdConfig {
    fn default() -> Self {
        Self {
            n_filters: None,
            wavelet: WaveletFamily::Db4,
            level: None,
            band: WaveletBand::Approx,
        }
    }
}

/// Fitted CSP + wavelet transform for one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CspWdExtractor {
    pub csp: CspModel,
    pub wavelet: WaveletSpec,
    pub band: WaveletBand,
}

impl CspWdExtractor {
    pub fn fit(train: &EpochSet, pair: (Label, Label), cfg: &CspWdConfig) -> Result<Self> {
        let ca = shrunk_class_covariance(train, pair.0)?;
        let cb = shrunk_class_covariance(train, pair.1)?;
        let f = cfg.n_filters.unwrap_or_else(|| default_filter_count(train.n_channels()));
        let csp = csp_fit(&ca, &cb, f, pair)?;
        let level = cfg.level.unwrap_or_else(|| default_level(train.sample_rate()));
        Ok(Self {
            csp,
            wavelet: WaveletSpec::new(cfg.wavelet, level)?,
            band: cfg.band,
        })
    }

    pub fn transform(&self, set: &EpochSet) -> Result<FeatureMatrix> {
        feature_matrix(set, &self.csp, self.wavelet, self.band)
    }
}
