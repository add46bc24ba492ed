//! Tap weights, the tapped delay line feeding them, and the per-sample
//! quantities every adaptive rule shares (output, error, sign, MSD).
//!
//! The regressor is stored newest-first: `samples[0]` is the current input,
//! `samples[i]` the input `i` steps ago. Weights use the same indexing, so
//! `w[i]` multiplies the input delayed by `i` samples.

use crate::error::{Error, Result};

/// `msd_db` returns this value instead of `-inf` when the deviation is
/// exactly zero.
pub const MSD_FLOOR_DB: f64 = -320.0;

const MSD_FLOOR_LINEAR: f64 = 1e-32;

#[derive(Debug, Clone, PartialEq)]
pub struct TapWeights(Vec<f64>);

impl TapWeights {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("taps", "a filter needs at least one tap"));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid("taps", format!("non-finite coefficient {bad}")));
        }
        Ok(Self(coeffs))
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len >= 1, "a filter needs at least one tap");
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn squared_norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    /// `self += scale * x`.
    pub fn add_scaled(&mut self, scale: f64, x: &RegressorWindow) {
        debug_assert_eq!(self.len(), x.len());
        for (w, &xi) in self.0.iter_mut().zip(x.as_slice()) {
            *w += scale * xi;
        }
    }
}

impl From<TapWeights> for Vec<f64> {
    fn from(w: TapWeights) -> Self {
        w.0
    }
}

/// Sliding window of the `N` most recent input samples, newest first.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorWindow(Vec<f64>);

impl RegressorWindow {
    pub fn zeros(len: usize) -> Self {
        assert!(len >= 1, "a regressor needs at least one tap");
        Self(vec![0.0; len])
    }

    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("regressor", "empty window"));
        }
        Ok(Self(samples))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Shift in a new sample at position 0, dropping the oldest.
    pub fn push(&mut self, sample: f64) {
        self.0.rotate_right(1);
        self.0[0] = sample;
    }

    pub fn pushed(mut self, sample: f64) -> Self {
        self.push(sample);
        self
    }

    pub fn energy(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }
}

/// One observation of the unknown system: the input sample entering the
/// delay line and the noisy desired output it produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePair {
    pub x: f64,
    pub d: f64,
}

/// Filter output `wᵀx`.
pub fn predict(w: &TapWeights, x: &RegressorWindow) -> Result<f64> {
    if w.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: w.len(),
            actual: x.len(),
        });
    }
    Ok(dot(w.as_slice(), x.as_slice()))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn error(d: f64, y: f64) -> f64 {
    d - y
}

/// Sign with `sgn(0) = +1`.
#[inline]
pub fn sgn(e: f64) -> f64 {
    if e >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `‖w − w_opt‖²`.
pub fn squared_deviation(w: &TapWeights, w_opt: &TapWeights) -> Result<f64> {
    if w.len() != w_opt.len() {
        return Err(Error::LengthMismatch {
            expected: w_opt.len(),
            actual: w.len(),
        });
    }
    Ok(w.as_slice()
        .iter()
        .zip(w_opt.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Converts a linear squared deviation to dB, clamping at [`MSD_FLOOR_DB`].
pub fn to_db(linear: f64) -> f64 {
    if linear.is_nan() {
        return f64::NAN;
    }
    10.0 * linear.max(MSD_FLOOR_LINEAR).log10()
}

pub fn msd_db(w: &TapWeights, w_opt: &TapWeights) -> Result<f64> {
    squared_deviation(w, w_opt).map(to_db)
}
