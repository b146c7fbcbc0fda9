//! Seeded synthetic sessions with class-dependent spatial band power.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{EpochSet, Label, SessionMeta};
use crate::error::{Error, Result};
use crate::preprocess::filter::{butterworth_bandpass, filtfilt};

pub const SOURCE_BAND: (f64, f64) = (8.0, 30.0);
const SOURCE_ORDER: usize = 4;
/// Extra samples generated on each side of an epoch so filter transients
/// stay outside it.
const GUARD: usize = 256;

/// Channels carrying the planted signal in [`SynthSpec::grasp_session`].
pub const CENTRAL_SITES: &[&str] = &["FC3", "FC1", "C5", "C3", "C1", "Cz", "CP3", "CP1", "CP5", "FC5"];

/// Defaults for [`SynthSpec::default_session`]: movement pairs are separable
/// but imperfect, Rest is far from every movement.
pub const DEFAULT_DISTINCT: f64 = 0.075;
pub const DEFAULT_REST_GAIN: f64 = 0.1;
pub const DEFAULT_NOISE_SIGMA: f64 = 0.2;
pub const DEFAULT_TRIALS_PER_CLASS: usize = 90;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSignal {
    pub label: Label,
    /// Unit-norm weights over channels.
    pub pattern: Vec<f64>,
    /// Amplitude of the band-limited source.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub channels: Vec<String>,
    pub sample_rate: f64,
    pub trials_per_class: usize,
    pub classes: Vec<ClassSignal>,
    /// Standard deviation of the spatially white noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Unit vector over `channels` from (name, weight) entries; unknown names
/// are ignored.
pub fn unit_pattern(channels: &[String], weights: &[(&str, f64)]) -> Result<Vec<f64>> {
    let mut p = vec![0.0; channels.len()];
    for (name, w) in weights {
        if let Some(i) = channels.iter().position(|c| c == name) {
            p[i] += w;
        }
    }
    normalized(p)
}

fn normalized(mut p: Vec<f64>) -> Result<Vec<f64>> {
    let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidArgument("pattern has no weight on the given channels".into()));
    }
    p.iter_mut().for_each(|v| *v /= norm);
    Ok(p)
}

impl SynthSpec {
    /// Four-class session: the three movements share a common central
    /// component plus a movement-specific one (`distinct` sets its relative
    /// weight); Rest keeps the common pattern at `rest_gain`.
    pub fn grasp_session(
        channels: Vec<String>,
        sample_rate: f64,
        trials_per_class: usize,
        distinct: f64,
        rest_gain: f64,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let sites: Vec<usize> = CENTRAL_SITES
            .iter()
            .filter_map(|s| channels.iter().position(|c| c == s))
            .collect();
        let sites = if sites.len() >= 3 {
            sites
        } else {
            (0..channels.len().min(CENTRAL_SITES.len())).collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005E_ED0F_5A77);
        let mut common = vec![0.0; channels.len()];
        for &i in &sites {
            common[i] = 1.0;
        }
        let common = normalized(common)?;
        // movement-specific directions: orthonormal, and orthogonal to the
        // common one, so every movement pair is equally far apart
        let mut basis: Vec<Vec<f64>> = vec![common.clone()];
        let mut classes = Vec::new();
        for label in [Label::TG, Label::PG, Label::Open] {
            let mut specific = vec![0.0; channels.len()];
            for &i in &sites {
                specific[i] = rng.sample::<f64, _>(StandardNormal);
            }
            for b in &basis {
                let dot: f64 = specific.iter().zip(b).map(|(x, y)| x * y).sum();
                specific.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
            let specific = normalized(specific)?;
            let pattern = common.iter().zip(&specific).map(|(c, s)| c + distinct * s).collect();
            basis.push(specific);
            classes.push(ClassSignal {
                label,
                pattern: normalized(pattern)?,
                gain: 1.0,
            });
        }
        classes.push(ClassSignal {
            label: Label::Rest,
            pattern: common,
            gain: rest_gain,
        });
        Ok(Self {
            channels,
            sample_rate,
            trials_per_class,
            classes,
            noise_sigma,
            seed,
        })
    }

    /// 63-channel cap at 250 Hz with the default separations.
    pub fn default_session(seed: u64) -> Self {
        let channels = crate::layout::CAP63.iter().map(|s| s.to_string()).collect();
        Self::grasp_session(
            channels,
            250.0,
            DEFAULT_TRIALS_PER_CLASS,
            DEFAULT_DISTINCT,
            DEFAULT_REST_GAIN,
            DEFAULT_NOISE_SIGMA,
            seed,
        )
        .expect("central sites exist on the cap")
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate != 125.0 && self.sample_rate != 250.0 {
            return Err(Error::InvalidArgument(format!("sample rate {} is not 125 or 250 Hz", self.sample_rate)));
        }
        if self.channels.is_empty() {
            return Err(Error::InvalidArgument("no channels".into()));
        }
        if self.trials_per_class < 3 {
            return Err(Error::InvalidArgument("at least 3 trials per class".into()));
        }
        if self.classes.is_empty() {
            return Err(Error::InvalidArgument("no classes".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument("noise sigma must be finite and non-negative".into()));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if self.classes[..i].iter().any(|o| o.label == c.label) {
                return Err(Error::InvalidArgument(format!("class {} listed twice", c.label)));
            }
            if c.pattern.len() != self.channels.len() {
                return Err(Error::DimensionMismatch(format!(
                    "pattern for {} has {} weights for {} channels",
                    c.label,
                    c.pattern.len(),
                    self.channels.len()
                )));
            }
            let norm = c.pattern.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("pattern for {} has norm {norm}", c.label)));
            }
            if !(c.gain > 0.0 && c.gain.is_finite()) {
                return Err(Error::InvalidArgument(format!("gain for {} must be positive", c.label)));
            }
        }
        Ok(())
    }
}

/// One-second epochs; trials cycle through the classes in the listed order.
pub fn generate(spec: &SynthSpec) -> Result<EpochSet> {
    spec.validate()?;
    let n = spec.sample_rate as usize;
    let e = spec.channels.len();
    let sos = butterworth_bandpass(SOURCE_ORDER, SOURCE_BAND.0, SOURCE_BAND.1, spec.sample_rate)?;
    // unit-variance white noise through an ideal band of width B keeps 2B/fs of its power
    let source_scale = (spec.sample_rate / (2.0 * (SOURCE_BAND.1 - SOURCE_BAND.0))).sqrt();
    let n_trials = spec.trials_per_class * spec.classes.len();
    let labels: Vec<Label> = (0..n_trials).map(|t| spec.classes[t % spec.classes.len()].label).collect();
    let trials: Vec<Vec<f64>> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let class = &spec.classes[t % spec.classes.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xA076_1D64_78BD_642Fu64.wrapping_mul(t as u64 + 1));
            let raw: Vec<f64> = (0..n + 2 * GUARD).map(|_| rng.sample(StandardNormal)).collect();
            let source = filtfilt(&sos, &raw);
            let source = &source[GUARD..GUARD + n];
            let mut out = Vec::with_capacity(e * n);
            for &w in &class.pattern {
                let amp = class.gain * source_scale * w;
                out.extend(source.iter().map(|s| amp * s + spec.noise_sigma * rng.sample::<f64, _>(StandardNormal)));
            }
            out
        })
        .collect();
    EpochSet::new(
        trials.concat(),
        n,
        labels,
        spec.sample_rate,
        spec.channels.clone(),
        SessionMeta::default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{ModelKind, ModelSpec};
    use crate::covariance::shrunk_class_covariance;
    use crate::csp::csp_fit;
    use crate::eval::{evaluate_pair, prepare_pair, EvalConfig, PairId};
    use crate::layout::CAP63;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn band_power(x: &[f64], fs: f64) -> f64 {
        // periodogram summed over the 8-30 Hz bins
        let n = x.len();
        let mut p = 0.0;
        for k in 0..=n / 2 {
            let f = k as f64 * fs / n as f64;
            if !(SOURCE_BAND.0..=SOURCE_BAND.1).contains(&f) {
                continue;
            }
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            p += (re * re + im * im) / n as f64;
        }
        p
    }

    #[test]
    fn same_seed_same_data() {
        let spec = SynthSpec::grasp_session(names(CAP63), 125.0, 5, 0.8, 0.2, 0.5, 11).unwrap();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.data(), b.data());
        assert_eq!(a.labels(), b.labels());
        assert_eq!(a.n_samples(), 125);
        let other = generate(&SynthSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a.data(), other.data());
    }

    #[test]
    fn rest_has_lower_band_power_on_pattern_channel() {
        let spec = SynthSpec::grasp_session(names(CAP63), 250.0, 20, 0.8, 0.2, 0.3, 3).unwrap();
        let set = generate(&spec).unwrap();
        let c3 = set.channel_index("C3").unwrap();
        let mean = |movement: bool| {
            let idx: Vec<usize> = (0..set.n_trials()).filter(|&t| (set.labels()[t] != Label::Rest) == movement).collect();
            idx.iter().map(|&t| band_power(set.channel(t, c3), 250.0)).sum::<f64>() / idx.len() as f64
        };
        assert!(mean(true) > 2.0 * mean(false), "{} {}", mean(true), mean(false));
    }

    #[test]
    fn source_has_nominal_power() {
        let chans = names(&["C3"]);
        let spec = SynthSpec {
            channels: chans.clone(),
            sample_rate: 250.0,
            trials_per_class: 200,
            classes: vec![ClassSignal {
                label: Label::TG,
                pattern: vec![1.0],
                gain: 1.0,
            }],
            noise_sigma: 0.0,
            seed: 1,
        };
        let set = generate(&spec).unwrap();
        let var = set.data().iter().map(|v| v * v).sum::<f64>() / set.data().len() as f64;
        assert!((var - 1.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn orthogonal_noiseless_patterns_are_separable_by_mdm() {
        let chans = names(&["C3", "Cz", "C4", "Pz"]);
        let spec = SynthSpec {
            classes: vec![
                ClassSignal {
                    label: Label::TG,
                    pattern: unit_pattern(&chans, &[("C3", 1.0), ("Cz", 1.0)]).unwrap(),
                    gain: 1.0,
                },
                ClassSignal {
                    label: Label::Rest,
                    pattern: unit_pattern(&chans, &[("C4", 1.0), ("Pz", -1.0)]).unwrap(),
                    gain: 1.0,
                },
            ],
            channels: chans,
            sample_rate: 125.0,
            trials_per_class: 20,
            noise_sigma: 1e-3,
            seed: 4,
        };
        let set = generate(&spec).unwrap();
        let cfg = EvalConfig::default();
        let data = prepare_pair(&set, PairId::TgRest, &cfg).unwrap();
        let r = evaluate_pair(&data, ModelKind::Mdm.pipeline(), &ModelSpec::new(ModelKind::Mdm), &cfg).unwrap();
        assert_eq!(r.mean.accuracy, 1.0);
    }

    #[test]
    fn csp_recovers_planted_pattern() {
        let chans = names(&["C3", "Cz", "C4", "CP3", "Pz", "O1"]);
        let p = unit_pattern(&chans, &[("C3", 2.0), ("Cz", 1.0), ("CP3", 1.0), ("C4", -0.5)]).unwrap();
        let spec = SynthSpec {
            classes: vec![
                ClassSignal {
                    label: Label::TG,
                    pattern: p.clone(),
                    gain: 1.0,
                },
                ClassSignal {
                    label: Label::Rest,
                    pattern: p.clone(),
                    gain: 0.2,
                },
            ],
            channels: chans,
            sample_rate: 250.0,
            trials_per_class: 30,
            noise_sigma: 0.05,
            seed: 5,
        };
        let set = generate(&spec).unwrap();
        let ca = shrunk_class_covariance(&set, Label::TG).unwrap();
        let cb = shrunk_class_covariance(&set, Label::Rest).unwrap();
        let m = csp_fit(&ca, &cb, 6, (Label::TG, Label::Rest)).unwrap();
        let w = m.filters.column(0);
        let cos = w.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() / w.norm();
        assert!(cos.abs() > 0.99, "{cos}");
    }

    #[test]
    fn invalid_specs_rejected() {
        let good = SynthSpec::grasp_session(names(CAP63), 125.0, 5, 0.8, 0.2, 0.5, 1).unwrap();
        assert!(generate(&SynthSpec { sample_rate: 200.0, ..good.clone() }).is_err());
        assert!(generate(&SynthSpec { trials_per_class: 2, ..good.clone() }).is_err());
        let mut bad = good.clone();
        bad.classes[0].pattern[0] += 0.5;
        assert!(generate(&bad).is_err());
        let mut bad = good.clone();
        bad.classes[1].gain = 0.0;
        assert!(generate(&bad).is_err());
        assert!(unit_pattern(&good.channels, &[("XX", 1.0)]).is_err());
    }
}
