//! Core domain types: class labels, session metadata and the epoch container.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decoded movement class.
///
/// The ordinal encoding is fixed: `TG = 0`, `PG = 1`, `Open = 2`, `Rest = 3`.
/// It is used by the epoch file format and for every "first class of the
/// pair" convention in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    /// Tripod grip.
    TG,
    /// Power grip.
    PG,
    Open,
    Rest,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::TG, Label::PG, Label::Open, Label::Rest];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Label> {
        match code {
            0 => Ok(Label::TG),
            1 => Ok(Label::PG),
            2 => Ok(Label::Open),
            3 => Ok(Label::Rest),
            other => Err(Error::UnknownLabel(other)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::TG => "TG",
            Label::PG => "PG",
            Label::Open => "Open",
            Label::Rest => "Rest",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tg" => Ok(Label::TG),
            "pg" => Ok(Label::PG),
            "open" => Ok(Label::Open),
            "rest" => Ok(Label::Rest),
            _ => Err(Error::Parse(format!("unknown label `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Group {
    #[default]
    AbleBodied,
    Amputee,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Condition {
    /// Motor execution.
    #[default]
    ME,
    /// Motor imagery.
    MI,
    /// Motor observation.
    MO,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    #[default]
    Right,
}

impl FromStr for Handedness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Handedness::Left),
            "right" | "r" => Ok(Handedness::Right),
            _ => Err(Error::Parse(format!("unknown handedness `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub subject_id: String,
    pub group: Group,
    pub session: u8,
    pub condition: Condition,
    pub handedness: Handedness,
}

impl Default for SessionMeta {
    fn default() -> Self {
        Self {
            subject_id: "unknown".to_string(),
            group: Group::AbleBodied,
            session: 1,
            condition: Condition::ME,
            handedness: Handedness::Right,
        }
    }
}

impl SessionMeta {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.session) {
            return Err(Error::Invariant(format!(
                "session must be 1, 2 or 3, got {}",
                self.session
            )));
        }
        Ok(())
    }
}

/// A labelled set of fixed-length multichannel epochs.
///
/// Samples are stored trial-major, channel-major, sample-minor in microvolts.
/// The set is immutable once built; every transform returns a new set.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    data: Vec<f64>,
    n_trials: usize,
    n_channels: usize,
    n_samples: usize,
    labels: Vec<Label>,
    sample_rate: f64,
    channels: Vec<String>,
    meta: SessionMeta,
}

impl EpochSet {
    pub fn new(
        data: Vec<f64>,
        n_samples: usize,
        labels: Vec<Label>,
        sample_rate: f64,
        channels: Vec<String>,
        meta: SessionMeta,
    ) -> Result<Self> {
        let n_trials = labels.len();
        let n_channels = channels.len();
        if data.len() != n_trials * n_channels * n_samples {
            return Err(Error::DimensionMismatch(format!(
                "data has {} values, expected {n_trials} x {n_channels} x {n_samples}",
                data.len()
            )));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Invariant(format!("invalid sample rate {sample_rate}")));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &channels {
            if !seen.insert(name.as_str()) {
                return Err(Error::Invariant(format!("duplicate channel name `{name}`")));
            }
        }
        meta.validate()?;
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let per_trial = (n_channels * n_samples).max(1);
            return Err(Error::NonFinite {
                trial: pos / per_trial,
                channel: (pos % per_trial) / n_samples.max(1),
                sample: pos % n_samples.max(1),
            });
        }
        Ok(Self {
            data,
            n_trials,
            n_channels,
            n_samples,
            labels,
            sample_rate,
            channels,
            meta,
        })
    }

    pub fn n_trials(&self) -> usize {
        self.n_trials
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn meta(&self) -> &SessionMeta {
        &self.meta
    }

    pub fn with_meta(mut self, meta: SessionMeta) -> Result<Self> {
        meta.validate()?;
        self.meta = meta;
        Ok(self)
    }

    /// Raw sample buffer, trial-major.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// All channels of one trial, channel-major.
    pub fn trial(&self, index: usize) -> &[f64] {
        let len = self.n_channels * self.n_samples;
        &self.data[index * len..(index + 1) * len]
    }

    pub fn channel(&self, trial: usize, channel: usize) -> &[f64] {
        let start = (trial * self.n_channels + channel) * self.n_samples;
        &self.data[start..start + self.n_samples]
    }

    /// One trial as an `E x S` matrix.
    pub fn trial_matrix(&self, index: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_channels, self.n_samples, self.trial(index))
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    /// Indices of trials carrying `label`, in storage order.
    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    /// New set holding the given trials in the given order.
    pub fn subset(&self, indices: &[usize]) -> EpochSet {
        let len = self.n_channels * self.n_samples;
        let mut data = Vec::with_capacity(indices.len() * len);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.trial(i));
            labels.push(self.labels[i]);
        }
        EpochSet {
            data,
            n_trials: indices.len(),
            n_channels: self.n_channels,
            n_samples: self.n_samples,
            labels,
            sample_rate: self.sample_rate,
            channels: self.channels.clone(),
            meta: self.meta.clone(),
        }
    }

    /// Trials whose label is one of `labels`, storage order preserved.
    pub fn filter_labels(&self, labels: &[Label]) -> EpochSet {
        let idx: Vec<usize> = (0..self.n_trials)
            .filter(|&i| labels.contains(&self.labels[i]))
            .collect();
        self.subset(&idx)
    }

    /// Same shape and metadata with replaced samples. Used by per-sample transforms.
    pub(crate) fn with_data(&self, data: Vec<f64>, n_samples: usize, sample_rate: f64) -> Result<EpochSet> {
        EpochSet::new(
            data,
            n_samples,
            self.labels.clone(),
            sample_rate,
            self.channels.clone(),
            self.meta.clone(),
        )
    }

    /// Applies `f` to every channel of every trial, producing `out_len` samples each.
    pub(crate) fn map_channels<F>(&self, out_len: usize, out_rate: f64, f: F) -> Result<EpochSet>
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync,
    {
        use rayon::prelude::*;
        let rows: Vec<Vec<f64>> = (0..self.n_trials * self.n_channels)
            .into_par_iter()
            .map(|row| {
                let start = row * self.n_samples;
                f(&self.data[start..start + self.n_samples])
            })
            .collect();
        let mut data = Vec::with_capacity(self.n_trials * self.n_channels * out_len);
        for r in rows {
            if r.len() != out_len {
                return Err(Error::DimensionMismatch(format!(
                    "channel transform produced {} samples, expected {out_len}",
                    r.len()
                )));
            }
            data.extend(r);
        }
        self.with_data(data, out_len, out_rate)
    }

    /// Appends trials from another set with identical channels and rate.
    pub fn concat(&self, other: &EpochSet) -> Result<EpochSet> {
        if other.channels != self.channels
            || other.n_samples != self.n_samples
            || other.sample_rate != self.sample_rate
        {
            return Err(Error::DimensionMismatch(
                "cannot concatenate sets with different shapes".into(),
            ));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        EpochSet::new(
            data,
            self.n_samples,
            labels,
            self.sample_rate,
            self.channels.clone(),
            self.meta.clone(),
        )
    }

    /// Keeps only the named channels, in the order given.
    pub fn select_electrodes<S: AsRef<str>>(&self, names: &[S]) -> Result<EpochSet> {
        let idx = names
            .iter()
            .map(|n| {
                self.channel_index(n.as_ref())
                    .ok_or_else(|| Error::UnknownChannel(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut data = Vec::with_capacity(self.n_trials * idx.len() * self.n_samples);
        for t in 0..self.n_trials {
            for &c in &idx {
                data.extend_from_slice(self.channel(t, c));
            }
        }
        EpochSet::new(
            data,
            self.n_samples,
            self.labels.clone(),
            self.sample_rate,
            idx.iter().map(|&c| self.channels[c].clone()).collect(),
            self.meta.clone(),
        )
    }
}
