//! Prosthesis commands: label → DAC voltage/duration lookup and the
//! six-byte wire format.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

pub const MIN_MILLIVOLTS: u16 = 600;
pub const MAX_MILLIVOLTS: u16 = 1600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DacChannel {
    None,
    Open,
    Close,
}

impl DacChannel {
    pub fn code(self) -> u8 {
        match self {
            DacChannel::None => 0,
            DacChannel::Open => 1,
            DacChannel::Close => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DacChannel::None),
            1 => Ok(DacChannel::Open),
            2 => Ok(DacChannel::Close),
            _ => Err(Error::Parse(format!("unknown DAC channel code {code}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DacCommand {
    pub channel: DacChannel,
    pub millivolts: u16,
    pub duration_ms: u16,
}

impl DacCommand {
    pub const IDLE: DacCommand = DacCommand {
        channel: DacChannel::None,
        millivolts: 0,
        duration_ms: 0,
    };

    pub fn validate(&self) -> Result<()> {
        match self.channel {
            DacChannel::None if self.millivolts != 0 || self.duration_ms != 0 => Err(Error::Invariant(format!(
                "idle command carries {} mV for {} ms",
                self.millivolts, self.duration_ms
            ))),
            DacChannel::None => Ok(()),
            _ if !(MIN_MILLIVOLTS..=MAX_MILLIVOLTS).contains(&self.millivolts) => Err(Error::Invariant(format!(
                "{} mV outside the {MIN_MILLIVOLTS}..={MAX_MILLIVOLTS} mV actuation window",
                self.millivolts
            ))),
            _ if self.duration_ms == 0 => Err(Error::Invariant("active command with zero duration".into())),
            _ => Ok(()),
        }
    }

    /// Channel, millivolts (u16 LE), duration (u16 LE), XOR of the first five bytes.
    pub fn encode(&self) -> Result<[u8; 6]> {
        self.validate()?;
        let mv = self.millivolts.to_le_bytes();
        let ms = self.duration_ms.to_le_bytes();
        let body = [self.channel.code(), mv[0], mv[1], ms[0], ms[1]];
        let check = body.iter().fold(0u8, |a, b| a ^ b);
        Ok([body[0], body[1], body[2], body[3], body[4], check])
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bytes: &[u8; 6] = bytes
            .try_into()
            .map_err(|_| Error::Parse(format!("command frame of {} bytes, expected 6", bytes.len())))?;
        let check = bytes[..5].iter().fold(0u8, |a, b| a ^ b);
        if check != bytes[5] {
            return Err(Error::Parse(format!("checksum {:#04x} != {:#04x}", bytes[5], check)));
        }
        let cmd = DacCommand {
            channel: DacChannel::from_code(bytes[0])?,
            millivolts: u16::from_le_bytes([bytes[1], bytes[2]]),
            duration_ms: u16::from_le_bytes([bytes[3], bytes[4]]),
        };
        cmd.validate()?;
        Ok(cmd)
    }
}

/// Label → command map. The default entries are placeholders inside the
/// actuation window, not calibrated values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LookupTable {
    pub entries: BTreeMap<Label, DacCommand>,
}

impl Default for LookupTable {
    fn default() -> Self {
        let cmd = |channel, millivolts, duration_ms| DacCommand {
            channel,
            millivolts,
            duration_ms,
        };
        Self {
            entries: BTreeMap::from([
                (Label::TG, cmd(DacChannel::Close, 900, 400)),
                (Label::PG, cmd(DacChannel::Close, 1300, 600)),
                (Label::Open, cmd(DacChannel::Open, 1200, 500)),
                (Label::Rest, DacCommand::IDLE),
            ]),
        }
    }
}

impl LookupTable {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Checks completeness and every entry. Returns the table as a
    /// [`ValidatedTable`] so lookups cannot skip this step.
    pub fn validate(self) -> Result<ValidatedTable> {
        validate_table(&self)?;
        Ok(ValidatedTable(self))
    }
}

pub fn validate_table(t: &LookupTable) -> Result<()> {
    for label in Label::ALL {
        let cmd = t
            .entries
            .get(&label)
            .ok_or_else(|| Error::Invariant(format!("lookup table has no entry for {label}")))?;
        if label == Label::Rest && cmd.channel != DacChannel::None {
            return Err(Error::Invariant("Rest must map to the idle channel".into()));
        }
        cmd.validate()
            .map_err(|e| Error::Invariant(format!("entry for {label}: {e}")))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedTable(LookupTable);

impl ValidatedTable {
    pub fn table(&self) -> &LookupTable {
        &self.0
    }
}

pub fn command_for(label: Label, t: &ValidatedTable) -> DacCommand {
    t.0.entries[&label]
}
