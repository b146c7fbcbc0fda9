//! IIR notch and Butterworth band-pass design, FIR anti-alias design, and
//! zero-phase (forward-backward) application.
//!
//! Signals are extended at both ends by repeated odd reflection before
//! filtering. The extension is long enough for the start-up transient of the
//! slowest pole to decay below 1e-13, so the forward-backward result does
//! not depend on which end the first pass starts from.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data::EpochSet;
use crate::error::{Error, Result};

/// Direct-form II transposed second-order section with `a0 == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn run(&self, x: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + s1;
            s1 = b1 * input - a1 * y + s2;
            s2 = b2 * input - a2 * y;
            *v = y;
        }
    }

    fn pole_radius(&self) -> f64 {
        let [a1, a2] = self.a;
        let disc = a1 * a1 - 4.0 * a2;
        if disc < 0.0 {
            a2.abs().sqrt()
        } else {
            let r = disc.sqrt();
            ((-a1 + r) / 2.0).abs().max(((-a1 - r) / 2.0).abs())
        }
    }

    fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let num = self.b[0] + self.b[1] * zi + self.b[2] * zi * zi;
        let den = 1.0 + self.a[0] * zi + self.a[1] * zi * zi;
        num / den
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Frequency response magnitude at `freq` Hz.
    pub fn gain_at(&self, freq: f64, sample_rate: f64) -> f64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * freq / sample_rate);
        self.sections
            .iter()
            .map(|s| s.response(z))
            .product::<Complex64>()
            .norm()
    }

    /// Samples needed for the start-up transient to decay below 1e-13.
    pub fn settle_len(&self) -> usize {
        let r = self
            .sections
            .iter()
            .map(Biquad::pole_radius)
            .fold(0.0_f64, f64::max);
        let base = if r <= 0.0 {
            4
        } else if r >= 1.0 {
            100_000
        } else {
            ((1e-13_f64).ln() / r.ln()).ceil() as usize
        };
        base + 16 * self.sections.len()
    }

    pub fn filter_in_place(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run(x);
        }
    }
}

/// Band-pass Butterworth of the given prototype order (`2 * order` poles),
/// designed by bilinear transform with pre-warped band edges and unit gain
/// at the geometric centre frequency.
pub fn butterworth_bandpass(order: usize, f_lo: f64, f_hi: f64, sample_rate: f64) -> Result<Sos> {
    let nyq = sample_rate / 2.0;
    if order == 0 {
        return Err(Error::InvalidArgument("filter order must be >= 1".into()));
    }
    if !(f_lo > 0.0 && f_lo < f_hi && f_hi < nyq) {
        return Err(Error::InvalidArgument(format!(
            "band-pass edges ({f_lo}, {f_hi}) must satisfy 0 < lo < hi < Nyquist ({nyq})"
        )));
    }
    let fs2 = 2.0 * sample_rate;
    let w_lo = fs2 * (PI * f_lo / sample_rate).tan();
    let w_hi = fs2 * (PI * f_hi / sample_rate).tan();
    let w0 = (w_lo * w_hi).sqrt();
    let bw = w_hi - w_lo;

    let mut digital = Vec::with_capacity(2 * order);
    for k in 0..order {
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let p = Complex64::from_polar(1.0, theta);
        let pb = p * bw;
        let root = (pb * pb - 4.0 * w0 * w0).sqrt();
        for s in [(pb + root) / 2.0, (pb - root) / 2.0] {
            digital.push((fs2 + s) / (fs2 - s));
        }
    }
    let mut upper: Vec<Complex64> = digital.into_iter().filter(|z| z.im > 0.0).collect();
    if upper.len() != order {
        return Err(Error::InvalidArgument(
            "band-pass design produced real poles; band too wide for this rate".into(),
        ));
    }
    upper.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    let mut sections: Vec<Biquad> = upper
        .iter()
        .map(|z| Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-2.0 * z.re, z.norm_sqr()],
        })
        .collect();
    let centre = 2.0 * (w0 / fs2).atan();
    let zc = Complex64::from_polar(1.0, centre);
    let total: f64 = sections.iter().map(|s| s.response(zc).norm()).product();
    let per = (1.0 / total).powf(1.0 / order as f64);
    for s in &mut sections {
        for b in &mut s.b {
            *b *= per;
        }
    }
    Ok(Sos { sections })
}

/// Second-order IIR notch with quality factor `q`.
pub fn iir_notch(f0: f64, q: f64, sample_rate: f64) -> Result<Sos> {
    let nyq = sample_rate / 2.0;
    if !(f0 > 0.0 && f0 < nyq) {
        return Err(Error::InvalidArgument(format!(
            "notch frequency {f0} must lie in (0, Nyquist = {nyq})"
        )));
    }
    if !(q > 0.0) {
        return Err(Error::InvalidArgument("notch Q must be positive".into()));
    }
    let w0 = 2.0 * PI * f0 / sample_rate;
    let bw = w0 / q;
    let gain = 1.0 / (1.0 + (bw / 2.0).tan());
    let c = w0.cos();
    Ok(Sos {
        sections: vec![Biquad {
            b: [gain, -2.0 * gain * c, gain],
            a: [-2.0 * gain * c, 2.0 * gain - 1.0],
        }],
    })
}

/// Windowed-sinc low-pass FIR (Hamming), unit DC gain.
pub fn fir_lowpass(taps: usize, cutoff: f64, sample_rate: f64) -> Result<Vec<f64>> {
    if taps < 2 {
        return Err(Error::InvalidArgument("FIR needs at least 2 taps".into()));
    }
    if !(cutoff > 0.0 && cutoff < sample_rate / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "FIR cutoff {cutoff} must lie in (0, Nyquist)"
        )));
    }
    let fc = cutoff / sample_rate;
    let mid = (taps - 1) as f64 / 2.0;
    let mut h: Vec<f64> = (0..taps)
        .map(|n| {
            let t = n as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            let w = 0.54 - 0.46 * (2.0 * PI * n as f64 / (taps - 1) as f64).cos();
            sinc * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in &mut h {
        *v /= sum;
    }
    Ok(h)
}

/// Extends `x` by `pad` samples on each side with repeated odd reflection.
pub fn odd_extend(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![x[0]; n + 2 * pad];
    }
    let mut buf = x.to_vec();
    let mut offset = 0usize;
    while offset < pad {
        let len = buf.len();
        let (first, last) = (buf[0], buf[len - 1]);
        let mut next = Vec::with_capacity(3 * len);
        next.extend((1..len).rev().map(|k| 2.0 * first - buf[k]));
        next.extend_from_slice(&buf);
        next.extend((0..len - 1).rev().map(|k| 2.0 * last - buf[k]));
        offset += len - 1;
        buf = next;
    }
    buf[offset - pad..offset + n + pad].to_vec()
}

/// Forward-backward application of an IIR cascade.
pub fn filtfilt(sos: &Sos, x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let pad = sos.settle_len();
    let mut ext = odd_extend(x, pad);
    sos.filter_in_place(&mut ext);
    ext.reverse();
    sos.filter_in_place(&mut ext);
    ext.reverse();
    ext[pad..pad + x.len()].to_vec()
}

/// Single causal pass (non-zero-phase), with odd-reflected lead-in.
pub fn lfilter(sos: &Sos, x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let pad = sos.settle_len();
    let mut ext = odd_extend(x, pad);
    sos.filter_in_place(&mut ext);
    ext[pad..pad + x.len()].to_vec()
}

fn fir_pass(h: &[f64], x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            h.iter()
                .enumerate()
                .take(n + 1)
                .map(|(k, hk)| hk * x[n - k])
                .sum()
        })
        .collect()
}

/// Forward-backward FIR filtering (zero group delay).
pub fn filtfilt_fir(h: &[f64], x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let pad = 3 * h.len();
    let ext = odd_extend(x, pad);
    let mut y = fir_pass(h, &ext);
    y.reverse();
    let mut y = fir_pass(h, &y);
    y.reverse();
    y[pad..pad + x.len()].to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FilterKind {
    Notch { f0: f64, q: f64 },
    Bandpass { f_lo: f64, f_hi: f64, order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    #[serde(flatten)]
    pub kind: FilterKind,
    pub zero_phase: bool,
}

impl FilterSpec {
    /// 50 Hz power-line notch, Q = 35, forward-backward.
    pub fn notch_50hz() -> Self {
        Self {
            kind: FilterKind::Notch { f0: 50.0, q: 35.0 },
            zero_phase: true,
        }
    }

    /// 8-30 Hz fourth-order Butterworth band-pass, forward-backward.
    pub fn mu_beta_band() -> Self {
        Self {
            kind: FilterKind::Bandpass {
                f_lo: 8.0,
                f_hi: 30.0,
                order: 4,
            },
            zero_phase: true,
        }
    }

    pub fn design(&self, sample_rate: f64) -> Result<Sos> {
        match self.kind {
            FilterKind::Notch { f0, q } => iir_notch(f0, q, sample_rate),
            FilterKind::Bandpass { f_lo, f_hi, order } => {
                butterworth_bandpass(order, f_lo, f_hi, sample_rate)
            }
        }
    }

    pub fn apply_to(&self, sos: &Sos, x: &[f64]) -> Vec<f64> {
        if self.zero_phase {
            filtfilt(sos, x)
        } else {
            lfilter(sos, x)
        }
    }
}

pub fn apply_filter(set: &EpochSet, spec: &FilterSpec) -> Result<EpochSet> {
    let sos = spec.design(set.sample_rate())?;
    set.map_channels(set.n_samples(), set.sample_rate(), |x| spec.apply_to(&sos, x))
}
