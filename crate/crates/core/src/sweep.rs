//! Exponential sine sweeps and their deconvolution into impulse responses.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{ImpulseResponse, SignalError};

/// Out-of-band magnitude floor relative to the sweep's spectral peak.
pub const DEFAULT_REGULARIZATION_DB: f64 = -120.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("need 0 < f1 < f2 <= fs/2, got f1 = {f1}, f2 = {f2}, fs = {fs}")]
    InvalidBand { f1: f64, f2: f64, fs: f64 },
    #[error("sweep duration must be positive, got {0} s")]
    InvalidDuration(f64),
    #[error("tail must be non-negative, got {0} s")]
    InvalidTail(f64),
    #[error("deconvolution needs a positive tail length")]
    NoTail,
    #[error("recording has {got} samples, shorter than the {sweep}-sample sweep")]
    RecordingTooShort { got: usize, sweep: usize },
    #[error("regularization must be a finite dB value, got {0}")]
    InvalidRegularization(f64),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub f1: f64,
    pub f2: f64,
    /// Sweep duration T, s.
    pub duration: f64,
    pub fs: f64,
    /// Silence appended after the sweep, s.
    pub tail: f64,
}

impl SweepSpec {
    pub fn new(f1: f64, f2: f64, duration: f64, fs: f64, tail: f64) -> Result<Self, SweepError> {
        let spec = Self {
            f1,
            f2,
            duration,
            fs,
            tail,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let Self {
            f1,
            f2,
            duration,
            fs,
            tail,
        } = *self;
        if !(f1.is_finite()
            && f2.is_finite()
            && fs.is_finite()
            && f1 > 0.0
            && f1 < f2
            && f2 <= fs / 2.0)
        {
            return Err(SweepError::InvalidBand { f1, f2, fs });
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(SweepError::InvalidDuration(duration));
        }
        if !(tail.is_finite() && tail >= 0.0) {
            return Err(SweepError::InvalidTail(tail));
        }
        Ok(())
    }

    /// Time constant `L = T / ln(f2/f1)`.
    pub fn rate(&self) -> f64 {
        self.duration / (self.f2 / self.f1).ln()
    }

    pub fn sweep_samples(&self) -> usize {
        (self.duration * self.fs).round() as usize
    }

    pub fn tail_samples(&self) -> usize {
        (self.tail * self.fs).round() as usize
    }

    pub fn total_samples(&self) -> usize {
        self.sweep_samples() + self.tail_samples()
    }

    /// Phase `K (e^(t/L) - 1)` with `K = 2π f1 L`.
    pub fn phase(&self, t: f64) -> f64 {
        let l = self.rate();
        2.0 * PI * self.f1 * l * ((t / l).exp() - 1.0)
    }

    /// `f1 e^(t/L)`: f1 at t = 0, f2 at t = T.
    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        self.f1 * (t / self.rate()).exp()
    }
}

/// The sweep followed by `tail` seconds of zeros.
pub fn gen_ess(spec: &SweepSpec) -> Result<Vec<f64>, SweepError> {
    spec.validate()?;
    let mut s: Vec<f64> = (0..spec.sweep_samples())
        .map(|i| spec.phase(i as f64 / spec.fs).sin())
        .collect();
    s.resize(spec.total_samples(), 0.0);
    Ok(s)
}

/// Impulse response from a recording of the sweep, by regularized
/// spectral division `R S* / (|S|² + ε)`.
///
/// Inside `[f1, f2]` the division is exact (ε = 0); outside, ε is the
/// square of `regularization_db` relative to the largest sweep magnitude.
/// The transform is long enough for linear convolution with anything
/// that fits in the tail, and the result is cut to the tail length, so a
/// loop-back recording gives a unit impulse at sample 0.
pub fn deconvolve(
    recording: &[f64],
    spec: &SweepSpec,
    regularization_db: f64,
) -> Result<ImpulseResponse, SweepError> {
    spec.validate()?;
    if !regularization_db.is_finite() {
        return Err(SweepError::InvalidRegularization(regularization_db));
    }
    let sweep_len = spec.sweep_samples();
    let out_len = spec.tail_samples();
    if out_len == 0 {
        return Err(SweepError::NoTail);
    }
    if recording.len() < sweep_len {
        return Err(SweepError::RecordingTooShort {
            got: recording.len(),
            sweep: sweep_len,
        });
    }
    let sweep = gen_ess(spec)?;
    let n = recording.len().max(sweep_len + out_len);
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let to_spectrum = |x: &[f64]| {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(n, Complex::new(0.0, 0.0));
        forward.process(&mut buf);
        buf
    };
    let s = to_spectrum(&sweep[..sweep_len]);
    let mut r = to_spectrum(recording);

    let peak = s.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let eps = (10f64.powf(regularization_db / 20.0) * peak).powi(2);
    let df = spec.fs / n as f64;
    for (k, (rk, sk)) in r.iter_mut().zip(&s).enumerate() {
        let f = k.min(n - k) as f64 * df;
        let power = sk.norm_sqr();
        let in_band = f >= spec.f1 && f <= spec.f2;
        let denom = if in_band && power > 0.0 {
            power
        } else {
            power + eps
        };
        *rk = if denom > 0.0 {
            *rk * sk.conj() / denom
        } else {
            Complex::new(0.0, 0.0)
        };
    }
    planner.plan_fft_inverse(n).process(&mut r);
    let scale = 1.0 / n as f64;
    let h = r[..out_len].iter().map(|c| c.re * scale).collect();
    Ok(ImpulseResponse::new(spec.fs, h)?)
}

/// Full linear convolution, via FFT.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let len = a.len() + b.len() - 1;
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(len);
    let transform = |x: &[f64]| {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(len, Complex::new(0.0, 0.0));
        forward.process(&mut buf);
        buf
    };
    let mut fa = transform(a);
    for (x, y) in fa.iter_mut().zip(transform(b)) {
        *x *= y;
    }
    planner.plan_fft_inverse(len).process(&mut fa);
    fa.iter().map(|c| c.re / len as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepSpec {
        SweepSpec::new(20.0, 2000.0, 2.0, 8000.0, 1.0).unwrap()
    }

    #[test]
    fn validation() {
        assert!(SweepSpec::new(0.0, 100.0, 1.0, 1000.0, 0.0).is_err());
        assert!(SweepSpec::new(200.0, 100.0, 1.0, 1000.0, 0.0).is_err());
        assert!(SweepSpec::new(20.0, 600.0, 1.0, 1000.0, 0.0).is_err());
        assert!(SweepSpec::new(20.0, 500.0, 0.0, 1000.0, 0.0).is_err());
        assert!(SweepSpec::new(20.0, 500.0, 1.0, 1000.0, -1.0).is_err());
        assert!(SweepSpec::new(20.0, 500.0, 1.0, 1000.0, 0.0).is_ok());
    }

    #[test]
    fn measurement_scale_sample_counts() {
        let spec = SweepSpec::new(20.0, 22_500.0, 45.0, 48_000.0, 17.0).unwrap();
        assert_eq!(spec.sweep_samples(), 2_160_000);
        assert_eq!(spec.tail_samples(), 816_000);
        assert_eq!(spec.total_samples(), 2_976_000);
    }

    #[test]
    fn frequency_endpoints_and_midpoint() {
        let spec = small();
        assert!((spec.instantaneous_frequency(0.0) - 20.0).abs() < 1e-12);
        assert!((spec.instantaneous_frequency(2.0) - 2000.0).abs() < 1e-9);
        assert!((spec.instantaneous_frequency(1.0) - 200.0).abs() < 1e-9);
        // derivative of the phase is 2π times the instantaneous frequency
        let h = 1e-6;
        let num = (spec.phase(0.7 + h) - spec.phase(0.7 - h)) / (2.0 * h) / (2.0 * PI);
        assert!((num - spec.instantaneous_frequency(0.7)).abs() < 1e-4);
    }

    #[test]
    fn generated_signal_shape() {
        let spec = small();
        let s = gen_ess(&spec).unwrap();
        assert_eq!(s.len(), 24_000);
        assert_eq!(s[0], 0.0);
        assert!(s[16_000..].iter().all(|&v| v == 0.0));
        assert!(s.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn recording_length_checks() {
        let spec = small();
        assert_eq!(
            deconvolve(&[0.0; 100], &spec, -120.0),
            Err(SweepError::RecordingTooShort {
                got: 100,
                sweep: 16_000
            })
        );
        let no_tail = SweepSpec { tail: 0.0, ..spec };
        assert_eq!(
            deconvolve(&[0.0; 16_000], &no_tail, -120.0),
            Err(SweepError::NoTail)
        );
    }

    #[test]
    fn convolve_matches_direct_sum() {
        let a = [1.0, 2.0, -1.0];
        let b = [0.5, 0.0, 3.0, 1.0];
        let want = [0.5, 1.0, 2.5, 7.0, -1.0, -1.0];
        for (x, y) in convolve(&a, &b).iter().zip(want) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
