//! Orthogonal multilevel discrete wavelet transform with periodic boundaries.
//!
//! Each level filters the current approximation with the scaling filter `h`
//! and its quadrature mirror `g`, downsampling by two with circular
//! indexing. Odd-length approximations are zero-padded by one sample before
//! the next level, which keeps the transform orthogonal: `idwt(dwt(x)) == x`
//! and `Σ coef² == Σ x²` for any length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WaveletFamily {
    Haar,
    Db2,
    #[default]
    Db4,
}

impl WaveletFamily {
    /// Scaling (reconstruction low-pass) filter, unit norm.
    pub fn scaling_filter(self) -> &'static [f64] {
        match self {
            WaveletFamily::Haar => &HAAR,
            WaveletFamily::Db2 => &DB2,
            WaveletFamily::Db4 => &DB4,
        }
    }

    pub fn wavelet_filter(self) -> Vec<f64> {
        let h = self.scaling_filter();
        let n = h.len();
        (0..n)
            .map(|k| if k % 2 == 0 { h[n - 1 - k] } else { -h[n - 1 - k] })
            .collect()
    }
}

const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

const DB2: [f64; 4] = [
    0.48296291314469025,
    0.836516303737469,
    0.22414386804185735,
    -0.12940952255092145,
];

const DB4: [f64; 8] = [
    0.23037781330885523,
    0.7148465705525415,
    0.6308807679295904,
    -0.02798376941698385,
    -0.18703481171888114,
    0.030841381835986965,
    0.032883011666982945,
    -0.010597401784997278,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveletSpec {
    pub family: WaveletFamily,
    pub level: usize,
}

impl WaveletSpec {
    pub fn new(family: WaveletFamily, level: usize) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidArgument("wavelet level must be >= 1".into()));
        }
        Ok(Self { family, level })
    }
}

/// Multilevel decomposition. `details[0]` is the finest band.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
    /// Input length at each level before padding, finest first.
    lengths: Vec<usize>,
    family: WaveletFamily,
}

impl Decomposition {
    pub fn level(&self) -> usize {
        self.details.len()
    }

    /// Deepest detail band.
    pub fn deepest_detail(&self) -> &[f64] {
        self.details.last().map(|d| d.as_slice()).unwrap_or(&[])
    }

    pub fn energy(&self) -> f64 {
        self.approx.iter().map(|v| v * v).sum::<f64>()
            + self.details.iter().flatten().map(|v| v * v).sum::<f64>()
    }

    pub fn signal_len(&self) -> usize {
        self.lengths.first().copied().unwrap_or(self.approx.len())
    }
}

fn analysis_step(x: &[f64], h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for k in 0..half {
        let mut sa = 0.0;
        let mut sd = 0.0;
        for (m, (&hm, &gm)) in h.iter().zip(g).enumerate() {
            let v = x[(2 * k + m) % n];
            sa += hm * v;
            sd += gm * v;
        }
        a[k] = sa;
        d[k] = sd;
    }
    (a, d)
}

fn synthesis_step(a: &[f64], d: &[f64], h: &[f64], g: &[f64]) -> Vec<f64> {
    let n = a.len() * 2;
    let mut x = vec![0.0; n];
    for k in 0..a.len() {
        for (m, (&hm, &gm)) in h.iter().zip(g).enumerate() {
            x[(2 * k + m) % n] += hm * a[k] + gm * d[k];
        }
    }
    x
}

pub fn dwt(signal: &[f64], spec: WaveletSpec) -> Result<Decomposition> {
    if spec.level == 0 {
        return Err(Error::InvalidArgument("wavelet level must be >= 1".into()));
    }
    if signal.len() < (1usize << spec.level) {
        return Err(Error::InsufficientData(format!(
            "signal of length {} too short for {} levels",
            signal.len(),
            spec.level
        )));
    }
    let h = spec.family.scaling_filter();
    let g = spec.family.wavelet_filter();
    let mut current = signal.to_vec();
    let mut details = Vec::with_capacity(spec.level);
    let mut lengths = Vec::with_capacity(spec.level);
    for _ in 0..spec.level {
        lengths.push(current.len());
        if current.len() % 2 == 1 {
            current.push(0.0);
        }
        let (a, d) = analysis_step(&current, h, &g);
        details.push(d);
        current = a;
    }
    Ok(Decomposition {
        approx: current,
        details,
        lengths,
        family: spec.family,
    })
}

pub fn idwt(dec: &Decomposition) -> Vec<f64> {
    let h = dec.family.scaling_filter();
    let g = dec.family.wavelet_filter();
    let mut current = dec.approx.clone();
    for (d, &len) in dec.details.iter().zip(&dec.lengths).rev() {
        let mut x = synthesis_step(&current, d, h, &g);
        x.truncate(len);
        current = x;
    }
    current
}

/// Rebuilds a decomposition with new coefficients but the shape of `like`.
pub(crate) fn with_coefficients(like: &Decomposition, approx: Vec<f64>, details: Vec<Vec<f64>>) -> Decomposition {
    Decomposition {
        approx,
        details,
        lengths: like.lengths.clone(),
        family: like.family,
    }
}
