//! Electrode layouts and the electrode-combination table used for ablation.
//!
//! The shipped table is a default, not a measurement: combination 0 is the
//! full 63-channel cap, 1 is 32 channels over the sensorimotor strip, 2-5
//! shrink contralateral neighbourhoods of C3 (C4 for left-handed subjects),
//! 6 covers parieto-occipital rows, 7-8 frontal rows (8 contralateral only)
//! and 9 the 16 positions of a 16-channel consumer headset. Everything can be
//! overridden by loading a layout file:
//!
//! ```toml
//! [layout]
//! names = ["Fp1", "Fp2", "..."]
//!
//! [[combination]]
//! id = 0
//! right = ["Fp1", "..."]
//! left = ["Fp1", "..."]
//! ```

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Handedness;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeLayout {
    pub names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
}

impl ElectrodeLayout {
    pub fn new(names: Vec<String>, positions: Option<Vec<[f64; 2]>>) -> Result<Self> {
        let layout = Self { names, positions };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for n in &self.names {
            if !seen.insert(n.as_str()) {
                return Err(Error::Invariant(format!("duplicate electrode `{n}`")));
            }
        }
        if let Some(p) = &self.positions {
            if p.len() != self.names.len() {
                return Err(Error::Invariant(format!(
                    "{} positions for {} electrodes",
                    p.len(),
                    self.names.len()
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// The 63 data channels of the 64-position research cap (reference excluded).
    pub fn cap63() -> Self {
        Self {
            names: CAP63.iter().map(|s| s.to_string()).collect(),
            positions: None,
        }
    }

    /// The 16 channels of the consumer headset.
    pub fn headset16() -> Self {
        Self {
            names: HEADSET16.iter().map(|s| s.to_string()).collect(),
            positions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationSpec {
    pub id: u8,
    #[serde(rename = "right")]
    pub members_right: Vec<String>,
    #[serde(rename = "left")]
    pub members_left: Vec<String>,
}

impl CombinationSpec {
    pub fn members(&self, handedness: Handedness) -> &[String] {
        match handedness {
            Handedness::Right => &self.members_right,
            Handedness::Left => &self.members_left,
        }
    }
}

/// Members of `combo` for the given handedness, in layout order.
pub fn resolve_combination(
    layout: &ElectrodeLayout,
    combo: &CombinationSpec,
    handedness: Handedness,
) -> Result<Vec<String>> {
    let members = combo.members(handedness);
    for m in members {
        if !layout.contains(m) {
            return Err(Error::UnknownChannel(m.clone()));
        }
    }
    Ok(layout
        .names
        .iter()
        .filter(|n| members.contains(n))
        .cloned()
        .collect())
}

/// Mirrors a 10-20 name across the midline: odd suffixes (left) swap with the
/// next even one (right), midline `z` names are unchanged.
pub fn mirror_name(name: &str) -> String {
    let split = name
        .char_indices()
        .find(|(_, c)| c.is_ascii_digit())
        .map(|(i, _)| i);
    match split {
        Some(i) => match name[i..].parse::<u32>() {
            Ok(n) => {
                let m = if n % 2 == 1 { n + 1 } else { n - 1 };
                format!("{}{}", &name[..i], m)
            }
            Err(_) => name.to_string(),
        },
        None => name.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutFile {
    pub layout: ElectrodeLayout,
    #[serde(rename = "combination")]
    pub combinations: Vec<CombinationSpec>,
}

impl LayoutFile {
    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        let mut ids = HashSet::new();
        for c in &self.combinations {
            if c.id > 9 {
                return Err(Error::Invariant(format!("combination id {} out of 0..=9", c.id)));
            }
            if !ids.insert(c.id) {
                return Err(Error::Invariant(format!("duplicate combination id {}", c.id)));
            }
            for h in [Handedness::Right, Handedness::Left] {
                resolve_combination(&self.layout, c, h)?;
            }
        }
        if let Some(c0) = self.get(0) {
            if c0.members_right.len() != self.layout.len() || c0.members_left.len() != self.layout.len() {
                return Err(Error::Invariant("combination 0 must be the full layout".into()));
            }
        }
        if let Some(c9) = self.get(9) {
            if c9.members_right.len() != 16 || c9.members_left.len() != 16 {
                return Err(Error::Invariant("combination 9 must have exactly 16 members".into()));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: u8) -> Option<&CombinationSpec> {
        self.combinations.iter().find(|c| c.id == id)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let f: LayoutFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        f.validate()?;
        Ok(f)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Default cap layout and combinations 0-9.
    pub fn default_cap63() -> Self {
        let layout = ElectrodeLayout::cap63();
        let combo = |id: u8, right: &[&str]| {
            let members_right: Vec<String> = right.iter().map(|s| s.to_string()).collect();
            let members_left = members_right.iter().map(|n| mirror_name(n)).collect();
            CombinationSpec {
                id,
                members_right,
                members_left,
            }
        };
        let combinations = vec![
            combo(0, CAP63),
            combo(1, COMBO1),
            combo(2, COMBO2),
            combo(3, COMBO3),
            combo(4, COMBO4),
            combo(5, COMBO5),
            combo(6, COMBO6),
            combo(7, COMBO7),
            combo(8, COMBO8),
            combo(9, HEADSET16),
        ];
        Self {
            layout,
            combinations,
        }
    }
}

pub const CAP63: &[&str] = &[
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "FC5", "FC1", "FC2", "FC6", "T7", "C3", "Cz", "C4",
    "T8", "TP9", "CP5", "CP1", "CP2", "CP6", "TP10", "P7", "P3", "Pz", "P4", "P8", "O1", "Oz", "O2",
    "AF7", "AF3", "AF4", "AF8", "F5", "F1", "F2", "F6", "FT9", "FT7", "FC3", "FCz", "FC4", "FT8",
    "FT10", "C5", "C1", "C2", "C6", "TP7", "CP3", "CPz", "CP4", "TP8", "P5", "P1", "P2", "P6", "PO7",
    "PO3", "POz", "PO4", "PO8",
];

pub const HEADSET16: &[&str] = &[
    "Fp1", "Fp2", "F7", "F3", "F4", "F8", "T7", "C3", "C4", "T8", "P7", "P3", "P4", "P8", "O1", "O2",
];

const COMBO1: &[&str] = &[
    "F1", "Fz", "F2", "FT7", "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "FT8", "T7", "C5",
    "C3", "C1", "Cz", "C2", "C4", "C6", "T8", "TP7", "CP5", "CP3", "CP1", "CPz", "CP2", "CP4",
    "CP6", "TP8", "P1", "P2",
];

const COMBO2: &[&str] = &[
    "FT7", "FC5", "FC3", "FC1", "FCz", "T7", "C5", "C3", "C1", "Cz", "TP7", "CP5", "CP3", "CP1",
    "CPz", "P3",
];

const COMBO3: &[&str] = &[
    "FT7", "FC5", "FC3", "FC1", "T7", "C5", "C3", "C1", "TP7", "CP5", "CP3", "CP1",
];

const COMBO4: &[&str] = &["FC5", "FC3", "FC1", "C5", "C3", "C1", "CP3", "CP1"];

const COMBO5: &[&str] = &["FC3", "C5", "C3", "CP3"];

const COMBO6: &[&str] = &[
    "P7", "P5", "P3", "P1", "Pz", "P2", "P4", "P6", "P8", "PO7", "PO3", "POz", "PO4", "PO8", "O1",
    "Oz", "O2",
];

const COMBO7: &[&str] = &[
    "Fp1", "Fp2", "AF7", "AF3", "AF4", "AF8", "F7", "F5", "F3", "F1", "Fz", "F2", "F4", "F6", "F8",
];

const COMBO8: &[&str] = &["Fp1", "AF7", "AF3", "F7", "F5", "F3", "F1", "Fz"];
