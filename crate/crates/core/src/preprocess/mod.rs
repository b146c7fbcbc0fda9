//! Preprocessing chain: segment, resample, notch, band-pass, augment, normalize.

pub mod augment;
pub mod filter;
pub mod normalize;
pub mod resample;
pub mod segment;

pub use augment::{augment_analogy, AugmentConfig};
pub use filter::{apply_filter, FilterKind, FilterSpec};
pub use normalize::{fit_normalization, normalize_robust, NormalizationParams};
pub use resample::resample;
pub use segment::{grasp_label_rule, segment, Event, EventList, GraspObject, Phase, Recording};

use serde::{Deserialize, Serialize};

use crate::data::EpochSet;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Output rate; `None` keeps the input rate.
    pub target_rate: Option<f64>,
    pub notch: Option<FilterSpec>,
    pub bandpass: Option<FilterSpec>,
    pub augment: Option<AugmentConfig>,
    pub normalize: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            target_rate: None,
            notch: Some(FilterSpec::notch_50hz()),
            bandpass: Some(FilterSpec::mu_beta_band()),
            augment: None,
            normalize: true,
        }
    }
}

/// Output of [`run`]: the processed set plus the fitted normalization, if any.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub set: EpochSet,
    pub normalization: Option<NormalizationParams>,
}

/// Runs the fixed chain on already-segmented epochs.
pub fn run(set: &EpochSet, cfg: &PreprocessConfig) -> Result<Preprocessed> {
    let mut out = match cfg.target_rate {
        Some(rate) => resample(set, rate)?,
        None => set.clone(),
    };
    if let Some(spec) = &cfg.notch {
        out = apply_filter(&out, spec)?;
    }
    if let Some(spec) = &cfg.bandpass {
        out = apply_filter(&out, spec)?;
    }
    if let Some(aug) = &cfg.augment {
        out = augment_analogy(&out, aug)?;
    }
    let mut normalization = None;
    if cfg.normalize {
        let params = fit_normalization(&out)?;
        out = normalize_robust(&out, &params)?;
        normalization = Some(params);
    }
    Ok(Preprocessed {
        set: out,
        normalization,
    })
}
