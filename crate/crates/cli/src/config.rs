//! Run configuration: a TOML file whose values command-line flags override.

use std::path::{Path, PathBuf};

use gripdecode::classify::ModelKind;
use gripdecode::eval::{AugmentOrder, PairId};
use gripdecode::features::WaveletBand;
use gripdecode::Handedness;
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub input: InputSection,
    pub synth: SynthSection,
    pub preprocess: PreprocessSection,
    pub evaluate: EvaluateSection,
    pub ablate: AblateSection,
    pub stats: StatsSection,
    pub actuation: ActuationSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    /// Epoch file. Without it, data comes from the `[synth]` section.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapLayout {
    Cap63,
    Headset16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub seed: u64,
    pub trials_per_class: usize,
    pub sample_rate: f64,
    pub layout: CapLayout,
    pub distinct: f64,
    pub rest_gain: f64,
    pub noise_sigma: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        use gripdecode::synth::*;
        Self {
            seed: 1,
            trials_per_class: DEFAULT_TRIALS_PER_CLASS,
            sample_rate: 250.0,
            layout: CapLayout::Cap63,
            distinct: DEFAULT_DISTINCT,
            rest_gain: DEFAULT_REST_GAIN,
            noise_sigma: DEFAULT_NOISE_SIGMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    /// Apply the chain before evaluating. Turn off for files that already
    /// went through `preprocess`.
    pub enabled: bool,
    pub target_rate: Option<f64>,
    pub notch: bool,
    pub bandpass: bool,
    pub normalize: bool,
    /// Per-class trial count after augmentation (the `preprocess` command only).
    pub augment_target: Option<usize>,
    pub augment_seed: u64,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        Self {
            enabled: true,
            target_rate: None,
            notch: true,
            bandpass: true,
            normalize: true,
            augment_target: None,
            augment_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub models: Vec<String>,
    pub pairs: Vec<String>,
    pub k: usize,
    pub fold_seed: u64,
    pub band: WaveletBand,
    pub augment_target: Option<usize>,
    pub augment_order: AugmentOrder,
    pub augment_seed: u64,
    pub alpha: f64,
    pub model_seed: u64,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.iter().map(|m| m.name().to_string()).collect(),
            pairs: PairId::ALL.iter().map(|p| p.name()).collect(),
            k: 5,
            fold_seed: 0,
            band: WaveletBand::Approx,
            augment_target: None,
            augment_order: AugmentOrder::InFold,
            augment_seed: 0,
            alpha: 0.05,
            model_seed: 0,
        }
    }
}

impl EvaluateSection {
    pub fn model_kinds(&self) -> Result<Vec<ModelKind>, UsageError> {
        if self.models.is_empty() {
            return Err(UsageError("at least one model is required".into()));
        }
        self.models
            .iter()
            .map(|m| m.parse().map_err(|e| UsageError(format!("{e}"))))
            .collect()
    }

    pub fn pair_ids(&self) -> Result<Vec<PairId>, UsageError> {
        if self.pairs.is_empty() {
            return Err(UsageError("at least one pair is required".into()));
        }
        self.pairs
            .iter()
            .map(|p| p.parse().map_err(|e| UsageError(format!("{e}"))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSection {
    /// Layout/combination file; the built-in 63-channel defaults otherwise.
    pub layout: Option<PathBuf>,
    pub combinations: Vec<u8>,
    pub handedness: Handedness,
}

impl Default for AblateSection {
    fn default() -> Self {
        Self {
            layout: None,
            combinations: (0..=9).collect(),
            handedness: Handedness::Right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    pub inputs: Vec<PathBuf>,
    pub reps: usize,
    pub subset: usize,
    pub seed: u64,
}

impl Default for StatsSection {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            reps: 1000,
            subset: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuationSection {
    pub table: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))
    }
}
