//! Magnitude spectra of impulse responses and what gets read off them.
//!
//! A spectrum is taken over the whole response with no window, exactly as
//! a single DFT, and reported in dB re 1. Averaging happens on impulse
//! responses before the transform, never on spectra.

mod peaks;
mod savgol;
mod stft;

pub use peaks::{
    detect_peaks, find_peaks, peak_variation, Peak, PeakOptions, PeakSpread, PeakVariation,
};
pub use savgol::{savgol_coefficients, savgol_filter, smooth};
pub use stft::{ridge_duration, spectrogram, Spectrogram};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;
use thiserror::Error;

use crate::signal::ImpulseResponse;

/// Magnitude assigned to bins with no energy.
pub const DB_FLOOR: f64 = -200.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("impulse response is empty")]
    EmptySignal,
    #[error("invalid band [{lo}, {hi}] Hz")]
    InvalidBand { lo: f64, hi: f64 },
    #[error("band [{lo}, {hi}] Hz exceeds Nyquist {nyquist} Hz")]
    BandAboveNyquist { lo: f64, hi: f64, nyquist: f64 },
    #[error("Savitzky-Golay window must be odd and positive, got {0}")]
    EvenWindow(usize),
    #[error("Savitzky-Golay order {order} must be below window {window}")]
    OrderTooHigh { order: usize, window: usize },
    #[error("sample rates differ: {0} Hz vs {1} Hz")]
    SampleRateMismatch(f64, f64),
    #[error("need one non-negative weight per response, not all zero")]
    InvalidWeights,
    #[error("no responses to average")]
    NoResponses,
    #[error("window of {window} samples is longer than the {len}-sample signal")]
    WindowTooLong { window: usize, len: usize },
    #[error("hop must be positive")]
    InvalidHop,
    #[error("need at least two spectra, got {0}")]
    TooFewSpectra(usize),
}

/// Closed frequency interval in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Result<Self, SpectralError> {
        if lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(SpectralError::InvalidBand { lo, hi })
        }
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo && f <= self.hi
    }
}

impl Default for Band {
    /// 20-150 Hz: above the DC offset of a delta-started rigid cavity and
    /// wide enough for every tabulated peak.
    fn default() -> Self {
        Self {
            lo: 20.0,
            hi: 150.0,
        }
    }
}

/// Magnitude spectrum in dB on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    f0: f64,
    df: f64,
    magnitudes_db: Vec<f64>,
    /// Transform length, when the spectrum came from one.
    fft_len: Option<usize>,
}

impl Spectrum {
    /// Spectrum from already-computed dB values (synthetic or loaded).
    pub fn from_db(f0: f64, df: f64, magnitudes_db: Vec<f64>) -> Self {
        Self {
            f0,
            df,
            magnitudes_db,
            fft_len: None,
        }
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn len(&self) -> usize {
        self.magnitudes_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes_db.is_empty()
    }

    pub fn magnitudes_db(&self) -> &[f64] {
        &self.magnitudes_db
    }

    pub fn fft_len(&self) -> Option<usize> {
        self.fft_len
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        self.f0 + bin as f64 * self.df
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.frequency(i))
    }

    /// Bin nearest to `f`, if inside the spectrum.
    pub fn bin_of(&self, f: f64) -> Option<usize> {
        let b = ((f - self.f0) / self.df).round();
        (b >= 0.0 && (b as usize) < self.len()).then_some(b as usize)
    }

    pub fn magnitude_at(&self, f: f64) -> Option<f64> {
        self.bin_of(f).map(|b| self.magnitudes_db[b])
    }

    /// Bins whose frequency falls in `band`, as a sub-spectrum.
    pub fn crop(&self, band: Band) -> Spectrum {
        let first = ((band.lo - self.f0) / self.df - 1e-9).ceil().max(0.0) as usize;
        let last = ((band.hi - self.f0) / self.df + 1e-9).floor();
        let end = if last < 0.0 {
            0
        } else {
            (last as usize + 1).min(self.len())
        };
        let first = first.min(end);
        Spectrum {
            f0: self.frequency(first),
            df: self.df,
            magnitudes_db: self.magnitudes_db[first..end].to_vec(),
            fft_len: self.fft_len,
        }
    }

    pub fn with_magnitudes(&self, magnitudes_db: Vec<f64>) -> Spectrum {
        assert_eq!(magnitudes_db.len(), self.len());
        Spectrum {
            magnitudes_db,
            ..self.clone()
        }
    }

    /// Signal energy implied by the bins present (one-sided Parseval:
    /// interior bins count twice). Equals the time-domain energy when the
    /// spectrum covers 0..=fs/2.
    pub fn energy(&self) -> Option<f64> {
        let n = self.fft_len?;
        let first = (self.f0 / self.df).round() as usize;
        let sum: f64 = self
            .magnitudes_db
            .iter()
            .enumerate()
            .map(|(i, db)| {
                let k = first + i;
                let weight = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
                weight * db_to_power(*db)
            })
            .sum();
        Some(sum / n as f64)
    }
}

pub fn amplitude_to_db(a: f64) -> f64 {
    if a > 0.0 {
        (20.0 * a.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

fn db_to_power(db: f64) -> f64 {
    if db <= DB_FLOOR {
        0.0
    } else {
        10f64.powf(db / 10.0)
    }
}

/// Complex DFT of a real signal, bins `0..=n/2`.
pub(crate) fn one_sided_dft(samples: &[f64]) -> Vec<Complex<f64>> {
    let n = samples.len();
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&s| Complex::new(s, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.truncate(n / 2 + 1);
    buf
}

/// Full-length, unwindowed magnitude spectrum cropped to `band`.
pub fn spectrum(ir: &ImpulseResponse, band: Band) -> Result<Spectrum, SpectralError> {
    if ir.is_empty() {
        return Err(SpectralError::EmptySignal);
    }
    let nyquist = ir.sample_rate() / 2.0;
    if band.hi > nyquist * (1.0 + 1e-12) {
        return Err(SpectralError::BandAboveNyquist {
            lo: band.lo,
            hi: band.hi,
            nyquist,
        });
    }
    let n = ir.len();
    let bins = one_sided_dft(ir.samples());
    let full = Spectrum {
        f0: 0.0,
        df: ir.sample_rate() / n as f64,
        magnitudes_db: bins.iter().map(|c| amplitude_to_db(c.norm())).collect(),
        fft_len: Some(n),
    };
    Ok(full.crop(band))
}

/// Weighted mean of impulse responses; shorter ones are zero-padded.
pub fn mean_ir(irs: &[ImpulseResponse], weights: &[f64]) -> Result<ImpulseResponse, SpectralError> {
    let first = irs.first().ok_or(SpectralError::NoResponses)?;
    if weights.len() != irs.len() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(SpectralError::InvalidWeights);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(SpectralError::InvalidWeights);
    }
    if let Some(other) = irs
        .iter()
        .find(|ir| ir.sample_rate() != first.sample_rate())
    {
        return Err(SpectralError::SampleRateMismatch(
            first.sample_rate(),
            other.sample_rate(),
        ));
    }
    let len = irs.iter().map(ImpulseResponse::len).max().unwrap_or(0);
    let mut acc = vec![0.0; len];
    for (ir, &w) in irs.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (a, s) in acc.iter_mut().zip(ir.samples()) {
            *a += w * s;
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(ImpulseResponse::new(first.sample_rate(), acc).expect("mean of finite samples"))
}

/// Equal-weight mean, the way chamber and site-wide means are formed.
pub fn equal_mean_ir(irs: &[ImpulseResponse]) -> Result<ImpulseResponse, SpectralError> {
    mean_ir(irs, &vec![1.0; irs.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freqs: &[(f64, f64)], fs: f64, secs: f64) -> ImpulseResponse {
        let n = (fs * secs) as usize;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                freqs
                    .iter()
                    .map(|&(f, tau)| (2.0 * PI * f * t).sin() * (-t / tau).exp())
                    .sum()
            })
            .collect();
        ImpulseResponse::new(fs, samples).unwrap()
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0
    }

    #[test]
    fn pure_tone_peak_bin() {
        let ir = tone(&[(50.0, f64::INFINITY)], 6000.0, 4.0);
        let s = spectrum(&ir, Band::new(0.0, 3000.0).unwrap()).unwrap();
        assert_eq!(s.df(), 0.25);
        let f = s.frequency(argmax(s.magnitudes_db()));
        assert!((f - 50.0).abs() <= s.df());
    }

    #[test]
    fn silence_sits_at_floor() {
        let ir = ImpulseResponse::new(1000.0, vec![0.0; 256]).unwrap();
        let s = spectrum(&ir, Band::new(0.0, 500.0).unwrap()).unwrap();
        assert!(s.magnitudes_db().iter().all(|&m| m == DB_FLOOR));
    }

    #[test]
    fn empty_and_out_of_band() {
        let ir = ImpulseResponse::new(1000.0, vec![]).unwrap();
        assert_eq!(
            spectrum(&ir, Band::default()),
            Err(SpectralError::EmptySignal)
        );
        let ir = ImpulseResponse::new(200.0, vec![1.0; 10]).unwrap();
        assert!(matches!(
            spectrum(&ir, Band::default()),
            Err(SpectralError::BandAboveNyquist { .. })
        ));
        assert!(Band::new(50.0, 20.0).is_err());
    }

    #[test]
    fn crop_bounds() {
        let s = Spectrum::from_db(0.0, 0.5, vec![0.0; 100]);
        let c = s.crop(Band::new(10.0, 20.0).unwrap());
        assert_eq!(c.f0(), 10.0);
        assert_eq!(c.len(), 21);
        let c = s.crop(Band::new(10.2, 10.4).unwrap());
        assert!(c.is_empty());
    }

    #[test]
    fn two_decaying_modes() {
        let ir = tone(&[(47.6, 1.0), (73.0, 1.0)], 2000.0, 8.0);
        let s = spectrum(&ir, Band::default()).unwrap();
        let peaks = detect_peaks(&s, 10.0, Band::default());
        let freqs: Vec<f64> = peaks.iter().map(|p| p.frequency).collect();
        assert_eq!(freqs.len(), 2, "{freqs:?}");
        assert!((freqs[0] - 47.6).abs() < 0.05);
        assert!((freqs[1] - 73.0).abs() < 0.05);
    }

    #[test]
    fn mean_of_identical_and_weighted() {
        let a = ImpulseResponse::new(100.0, vec![1.0, 2.0, 3.0]).unwrap();
        let b = ImpulseResponse::new(100.0, vec![-1.0, 5.0]).unwrap();
        let m = mean_ir(&[a.clone(), a.clone(), a.clone()], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, a);
        assert_eq!(mean_ir(&[a.clone(), b.clone()], &[1.0, 0.0]).unwrap(), a);
        let m = equal_mean_ir(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(m.samples(), &[0.0, 3.5, 1.5]);
        let c = ImpulseResponse::new(50.0, vec![1.0]).unwrap();
        assert!(matches!(
            equal_mean_ir(&[a.clone(), c]),
            Err(SpectralError::SampleRateMismatch(..))
        ));
        assert_eq!(
            mean_ir(std::slice::from_ref(&a), &[0.0]),
            Err(SpectralError::InvalidWeights)
        );
        assert_eq!(mean_ir(&[a], &[-1.0]), Err(SpectralError::InvalidWeights));
    }
}
