//! Binary epoch file format.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! magic        4 bytes  "EEGE"
//! version      u16      1
//! n_trials     u32
//! n_channels   u32
//! n_samples    u32
//! sample_rate  f32
//! labels       n_trials x u8   (0 = TG, 1 = PG, 2 = Open, 3 = Rest)
//! channels     n_channels x (u16 byte length, UTF-8 bytes)
//! data         n_trials x n_channels x n_samples x f32
//! ```
//!
//! Samples are held as `f64` in memory and narrowed to `f32` on write, so
//! `load(save(s)) == s` holds exactly for sets whose samples are
//! representable in `f32` (every set that was itself loaded from a file).
//! `save(load(bytes)) == bytes` always holds.

use std::fs;
use std::path::Path;

use crate::data::{EpochSet, Label, SessionMeta};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EEGE";
pub const VERSION: u16 = 1;

pub fn load_epochs(path: impl AsRef<Path>) -> Result<EpochSet> {
    let bytes = fs::read(path)?;
    decode_epochs(&bytes)
}

pub fn save_epochs(set: &EpochSet, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_epochs(set)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn encode_epochs(set: &EpochSet) -> Result<Vec<u8>> {
    let sample_rate = set.sample_rate() as f32;
    if !sample_rate.is_finite() {
        return Err(Error::Invariant("sample rate does not fit in f32".into()));
    }
    let mut out = Vec::with_capacity(32 + set.data().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for dim in [set.n_trials(), set.n_channels(), set.n_samples()] {
        let d = u32::try_from(dim)
            .map_err(|_| Error::Invariant(format!("dimension {dim} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend(set.labels().iter().map(|l| l.code()));
    for name in set.channels() {
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Invariant(format!("channel name too long: {name}")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    let per_trial = set.n_channels() * set.n_samples();
    for (i, &v) in set.data().iter().enumerate() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::NonFinite {
                trial: i / per_trial,
                channel: (i % per_trial) / set.n_samples(),
                sample: i % set.n_samples(),
            });
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::MalformedHeader(format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_epochs(bytes: &[u8]) -> Result<EpochSet> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(Error::MalformedHeader("bad magic".into()));
    }
    let version = cur.u16("version")?;
    if version != VERSION {
        return Err(Error::MalformedHeader(format!("unsupported version {version}")));
    }
    let n_trials = cur.u32("n_trials")? as usize;
    let n_channels = cur.u32("n_channels")? as usize;
    let n_samples = cur.u32("n_samples")? as usize;
    let sample_rate = cur.f32("sample_rate")?;
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::MalformedHeader(format!("invalid sample rate {sample_rate}")));
    }
    let labels = cur
        .take(n_trials, "labels")?
        .iter()
        .map(|&c| Label::from_code(c))
        .collect::<Result<Vec<_>>>()?;
    let mut channels = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        let len = cur.u16("channel name length")? as usize;
        let raw = cur.take(len, "channel name")?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| Error::MalformedHeader("channel name is not UTF-8".into()))?;
        channels.push(name.to_string());
    }
    let expected = n_trials
        .checked_mul(n_channels)
        .and_then(|v| v.checked_mul(n_samples))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
    let remaining = bytes.len() - cur.pos;
    if remaining != expected {
        return Err(Error::DimensionMismatch(format!(
            "header declares {expected} data bytes, file holds {remaining}"
        )));
    }
    let per_trial = n_channels * n_samples;
    let mut data = Vec::with_capacity(expected / 4);
    for (i, chunk) in bytes[cur.pos..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFinite {
                trial: i / per_trial,
                channel: (i % per_trial) / n_samples,
                sample: i % n_samples,
            });
        }
        data.push(v as f64);
    }
    EpochSet::new(
        data,
        n_samples,
        labels,
        sample_rate as f64,
        channels,
        SessionMeta::default(),
    )
}
