//! Event-locked segmentation of continuous recordings.

use serde::{Deserialize, Serialize};

use crate::data::{EpochSet, Label, SessionMeta};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Grip,
    Release,
    RestCross,
}

/// Grasped object: cube, cup, clothespin, or none for resting trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraspObject {
    BB,
    CUP,
    CS,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time_s: f64,
    pub phase: Phase,
    pub object: GraspObject,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventList {
    entries: Vec<Event>,
}

impl EventList {
    pub fn new(entries: Vec<Event>) -> Result<Self> {
        for w in entries.windows(2) {
            if w[1].time_s < w[0].time_s {
                return Err(Error::Invariant("event times must be non-decreasing".into()));
            }
        }
        for e in &entries {
            if !e.time_s.is_finite() || e.time_s < 0.0 {
                return Err(Error::Invariant(format!("invalid event time {}", e.time_s)));
            }
            let ok = match e.phase {
                Phase::RestCross => e.object == GraspObject::None,
                Phase::Grip | Phase::Release => e.object != GraspObject::None,
            };
            if !ok {
                return Err(Error::Invariant(format!(
                    "invalid phase/object combination {:?}/{:?}",
                    e.phase, e.object
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[Event] {
        &self.entries
    }
}

/// Maps an event to its decoded class.
pub type LabelRule = fn(&Event) -> Option<Label>;

/// Grip of cube or clothespin is a tripod grip, grip of the cup a power
/// grip, any release is an opening, and fixation-cross trials are rest.
pub fn grasp_label_rule(e: &Event) -> Option<Label> {
    match (e.phase, e.object) {
        (Phase::Grip, GraspObject::BB | GraspObject::CS) => Some(Label::TG),
        (Phase::Grip, GraspObject::CUP) => Some(Label::PG),
        (Phase::Release, _) => Some(Label::Open),
        (Phase::RestCross, _) => Some(Label::Rest),
        (Phase::Grip, GraspObject::None) => None,
    }
}

/// Continuous multichannel recording, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub channels: Vec<String>,
    pub data: Vec<Vec<f64>>,
    pub sample_rate: f64,
}

impl Recording {
    pub fn len(&self) -> usize {
        self.data.first().map(Vec::len).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn segment(
    recording: &Recording,
    events: &EventList,
    window_s: f64,
    label_rule: LabelRule,
) -> Result<EpochSet> {
    if recording.data.len() != recording.channels.len() {
        return Err(Error::DimensionMismatch("channel names vs data rows".into()));
    }
    let len = recording.len();
    if recording.data.iter().any(|row| row.len() != len) {
        return Err(Error::DimensionMismatch("ragged recording".into()));
    }
    if !(window_s > 0.0) {
        return Err(Error::InvalidArgument("window must be positive".into()));
    }
    let n = (window_s * recording.sample_rate).round() as usize;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for e in events.entries() {
        let label = label_rule(e).ok_or_else(|| {
            Error::InvalidArgument(format!("no label for {:?}/{:?}", e.phase, e.object))
        })?;
        let start = (e.time_s * recording.sample_rate).round() as usize;
        let end = start + n;
        if end > len {
            return Err(Error::OutOfBounds { start, end, len });
        }
        for row in &recording.data {
            data.extend_from_slice(&row[start..end]);
        }
        labels.push(label);
    }
    EpochSet::new(
        data,
        n,
        labels,
        recording.sample_rate,
        recording.channels.clone(),
        SessionMeta::default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(rate: f64, seconds: f64) -> Recording {
        let n = (rate * seconds) as usize;
        Recording {
            channels: vec!["C3".into(), "C4".into()],
            data: vec![
                (0..n).map(|i| i as f64 / rate).collect(),
                (0..n).map(|i| -(i as f64) / rate).collect(),
            ],
            sample_rate: rate,
        }
    }

    fn ev(t: f64, phase: Phase, object: GraspObject) -> Event {
        Event {
            time_s: t,
            phase,
            object,
        }
    }

    #[test]
    fn one_second_at_250hz() {
        let events = EventList::new(vec![ev(1.0, Phase::Grip, GraspObject::CUP)]).unwrap();
        let s = segment(&ramp(250.0, 4.0), &events, 1.0, grasp_label_rule).unwrap();
        assert_eq!(s.n_samples(), 250);
        assert_eq!(s.labels(), &[Label::PG]);
    }

    #[test]
    fn ramp_slice_matches() {
        let rec = ramp(250.0, 4.0);
        let events = EventList::new(vec![ev(1.2, Phase::Release, GraspObject::BB)]).unwrap();
        let s = segment(&rec, &events, 1.0, grasp_label_rule).unwrap();
        let start = 300;
        for k in 0..250 {
            assert_eq!(s.channel(0, 0)[k], (start + k) as f64 / 250.0);
            assert_eq!(s.channel(0, 1)[k], -((start + k) as f64) / 250.0);
        }
    }

    #[test]
    fn label_rule_table() {
        let cases = [
            (Phase::Grip, GraspObject::BB, Label::TG),
            (Phase::Grip, GraspObject::CS, Label::TG),
            (Phase::Grip, GraspObject::CUP, Label::PG),
            (Phase::Release, GraspObject::CUP, Label::Open),
            (Phase::RestCross, GraspObject::None, Label::Rest),
        ];
        for (p, o, l) in cases {
            assert_eq!(grasp_label_rule(&ev(0.0, p, o)), Some(l));
        }
    }

    #[test]
    fn window_past_end_is_bounds_error() {
        let rec = ramp(250.0, 4.0);
        let events = EventList::new(vec![ev(3.5, Phase::Grip, GraspObject::BB)]).unwrap();
        assert!(matches!(
            segment(&rec, &events, 1.0, grasp_label_rule),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn invalid_event_lists() {
        assert!(EventList::new(vec![
            ev(2.0, Phase::Grip, GraspObject::BB),
            ev(1.0, Phase::Grip, GraspObject::BB)
        ])
        .is_err());
        assert!(EventList::new(vec![ev(1.0, Phase::RestCross, GraspObject::CUP)]).is_err());
        assert!(EventList::new(vec![ev(1.0, Phase::Grip, GraspObject::None)]).is_err());
    }
}
