//! Per-electrode robust scaling: centre on the median, divide by the
//! 5th-95th percentile range, with percentiles pooled over all trials and
//! samples of every class.

use serde::{Deserialize, Serialize};

use crate::data::EpochSet;
use crate::error::{Error, Result};

/// Percentile of already-sorted data with linear interpolation between
/// order statistics (rank `p/100 * (n - 1)`).
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPercentiles {
    pub q5: f64,
    pub q50: f64,
    pub q95: f64,
}

impl ChannelPercentiles {
    pub fn scale(&self) -> f64 {
        self.q95 - self.q5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub channels: Vec<String>,
    pub percentiles: Vec<ChannelPercentiles>,
}

pub fn fit_normalization(set: &EpochSet) -> Result<NormalizationParams> {
    let mut percentiles = Vec::with_capacity(set.n_channels());
    for c in 0..set.n_channels() {
        let mut pooled: Vec<f64> = (0..set.n_trials())
            .flat_map(|t| set.channel(t, c).iter().copied())
            .collect();
        if pooled.is_empty() {
            return Err(Error::InsufficientData("no samples to fit normalization".into()));
        }
        pooled.sort_by(f64::total_cmp);
        let p = ChannelPercentiles {
            q5: percentile_sorted(&pooled, 5.0),
            q50: percentile_sorted(&pooled, 50.0),
            q95: percentile_sorted(&pooled, 95.0),
        };
        if !(p.scale() > 0.0) {
            return Err(Error::DegenerateScale(set.channels()[c].clone()));
        }
        percentiles.push(p);
    }
    Ok(NormalizationParams {
        channels: set.channels().to_vec(),
        percentiles,
    })
}

pub fn normalize_robust(set: &EpochSet, params: &NormalizationParams) -> Result<EpochSet> {
    if params.percentiles.len() != set.n_channels() {
        return Err(Error::DimensionMismatch(format!(
            "normalization fitted on {} channels, set has {}",
            params.percentiles.len(),
            set.n_channels()
        )));
    }
    let s = set.n_samples();
    let e = set.n_channels();
    let data = set
        .data()
        .chunks(s.max(1))
        .enumerate()
        .flat_map(|(row, x)| {
            let p = params.percentiles[row % e];
            let scale = p.scale();
            x.iter().map(move |v| (v - p.q50) / scale)
        })
        .collect();
    set.with_data(data, s, set.sample_rate())
}
