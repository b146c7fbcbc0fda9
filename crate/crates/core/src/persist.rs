//! Model files: one JSON header line followed by a little-endian `f64` payload.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn write_blob<H: Serialize>(header: &H, payload: &[f64]) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec(header).map_err(|e| Error::Parse(e.to_string()))?;
    out.push(b'\n');
    out.reserve(payload.len() * 8);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn read_blob<H: DeserializeOwned>(bytes: &[u8]) -> Result<(H, Vec<f64>)> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("missing header line".into()))?;
    let header = serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let body = &bytes[nl + 1..];
    if !body.len().is_multiple_of(8) {
        return Err(Error::DimensionMismatch(format!("payload of {} bytes is not a whole number of f64", body.len())));
    }
    let payload = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((header, payload))
}

/// Checks that a payload holds exactly `expected` values.
pub(crate) fn expect_len(payload: &[f64], expected: usize) -> Result<()> {
    if payload.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "payload has {} values, header implies {expected}",
            payload.len()
        )));
    }
    Ok(())
}
