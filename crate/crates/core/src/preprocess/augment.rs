//! Analogy-based trial augmentation in the wavelet domain.
//!
//! For an ordered triplet `(a, b, c)` of distinct same-class trials, each
//! channel of the artificial trial is rebuilt from the coefficients of `c`
//! with magnitudes rescaled by `|w_b| / (|w_a| + ε)` clamped to `[1/4, 4]`:
//! the new trial differs from `c` the way `b` differs from `a`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EpochSet, Label};
use crate::error::{Error, Result};
use crate::wavelet::{dwt, idwt, with_coefficients, WaveletFamily, WaveletSpec};

const EPS: f64 = 1e-12;
const MIN_RATIO: f64 = 0.25;
const MAX_RATIO: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub target_per_class: usize,
    pub seed: u64,
    pub wavelet: WaveletFamily,
    pub level: usize,
}

impl AugmentConfig {
    pub fn new(target_per_class: usize, seed: u64) -> Self {
        Self {
            target_per_class,
            seed,
            wavelet: WaveletFamily::Db4,
            level: 3,
        }
    }
}

fn analogy_coefficient(wa: f64, wb: f64, wc: f64) -> f64 {
    let ratio = (wb.abs() / (wa.abs() + EPS)).clamp(MIN_RATIO, MAX_RATIO);
    wc.signum() * wc.abs() * ratio
}

/// One artificial channel from three source channels.
pub fn analogy_channel(a: &[f64], b: &[f64], c: &[f64], spec: WaveletSpec) -> Result<Vec<f64>> {
    let da = dwt(a, spec)?;
    let db = dwt(b, spec)?;
    let dc = dwt(c, spec)?;
    let mix = |xa: &[f64], xb: &[f64], xc: &[f64]| -> Vec<f64> {
        xa.iter()
            .zip(xb)
            .zip(xc)
            .map(|((&wa, &wb), &wc)| analogy_coefficient(wa, wb, wc))
            .collect()
    };
    let approx = mix(&da.approx, &db.approx, &dc.approx);
    let details = (0..dc.level())
        .map(|l| mix(&da.details[l], &db.details[l], &dc.details[l]))
        .collect();
    Ok(idwt(&with_coefficients(&dc, approx, details)))
}

fn class_seed(seed: u64, label: Label) -> u64 {
    seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(label.code() as u64 + 1))
}

/// Grows each present class to `target_per_class` trials. Originals come
/// first in their original order, followed by artificial trials grouped by
/// class.
pub fn augment_analogy(set: &EpochSet, cfg: &AugmentConfig) -> Result<EpochSet> {
    let max_level = (usize::BITS - 1 - set.n_samples().max(1).leading_zeros()) as usize;
    let spec = WaveletSpec::new(cfg.wavelet, cfg.level.min(max_level).max(1))?;
    let mut data = set.data().to_vec();
    let mut labels = set.labels().to_vec();
    for label in Label::ALL {
        let members = set.indices_of(label);
        if members.is_empty() {
            continue;
        }
        if members.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "class {label} has {} trials, analogy augmentation needs 3",
                members.len()
            )));
        }
        if cfg.target_per_class < members.len() {
            return Err(Error::InvalidArgument(format!(
                "target {} below current count {} for class {label}",
                cfg.target_per_class,
                members.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(class_seed(cfg.seed, label));
        for _ in members.len()..cfg.target_per_class {
            let pick = sample(&mut rng, members.len(), 3);
            let (a, b, c) = (members[pick.index(0)], members[pick.index(1)], members[pick.index(2)]);
            for ch in 0..set.n_channels() {
                data.extend(analogy_channel(
                    set.channel(a, ch),
                    set.channel(b, ch),
                    set.channel(c, ch),
                    spec,
                )?);
            }
            labels.push(label);
        }
    }
    EpochSet::new(
        data,
        set.n_samples(),
        labels,
        set.sample_rate(),
        set.channels().to_vec(),
        set.meta().clone(),
    )
}
