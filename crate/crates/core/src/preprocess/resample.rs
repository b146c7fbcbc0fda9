//! Integer-factor decimation with a zero-phase anti-alias FIR.

use crate::data::EpochSet;
use crate::error::{Error, Result};

use super::filter::{filtfilt_fir, fir_lowpass};

pub const ANTI_ALIAS_TAPS: usize = 64;
/// Anti-alias cutoff as a fraction of the target rate.
pub const ANTI_ALIAS_CUTOFF: f64 = 0.4;

pub fn decimation_factor(source_rate: f64, target_rate: f64) -> Result<usize> {
    if !(target_rate > 0.0) {
        return Err(Error::InvalidArgument(format!("invalid target rate {target_rate}")));
    }
    if target_rate > source_rate {
        return Err(Error::InvalidArgument(format!(
            "target rate {target_rate} Hz above source rate {source_rate} Hz"
        )));
    }
    let ratio = source_rate / target_rate;
    let factor = ratio.round();
    if (ratio - factor).abs() > 1e-9 * ratio {
        return Err(Error::InvalidArgument(format!(
            "{source_rate} Hz -> {target_rate} Hz is not an integer decimation"
        )));
    }
    Ok(factor as usize)
}

/// Decimates one channel: low-pass then keep every `factor`-th sample.
pub fn decimate(x: &[f64], factor: usize, source_rate: f64) -> Result<Vec<f64>> {
    if factor == 1 {
        return Ok(x.to_vec());
    }
    let target = source_rate / factor as f64;
    let h = fir_lowpass(ANTI_ALIAS_TAPS, ANTI_ALIAS_CUTOFF * target, source_rate)?;
    let y = filtfilt_fir(&h, x);
    Ok(y.into_iter().step_by(factor).collect())
}

/// Resamples every epoch to `target_rate`. Equal rates return the set unchanged.
pub fn resample(set: &EpochSet, target_rate: f64) -> Result<EpochSet> {
    let factor = decimation_factor(set.sample_rate(), target_rate)?;
    if factor == 1 {
        return Ok(set.clone());
    }
    let source = set.sample_rate();
    let h = fir_lowpass(ANTI_ALIAS_TAPS, ANTI_ALIAS_CUTOFF * target_rate, source)?;
    let out_len = set.n_samples().div_ceil(factor);
    set.map_channels(out_len, target_rate, |x| {
        filtfilt_fir(&h, x).into_iter().step_by(factor).collect()
    })
}
