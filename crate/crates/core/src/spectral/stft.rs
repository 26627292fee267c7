use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use super::{amplitude_to_db, Band, SpectralError};
use crate::signal::ImpulseResponse;

/// Short-time magnitude grid: `frames[t][k]` is the level in dB of bin `k`
/// (frequency `f0 + k*df`) in the frame centered at `times[t]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrogram {
    pub times: Vec<f64>,
    pub f0: f64,
    pub df: f64,
    pub frames: Vec<Vec<f64>>,
}

impl Spectrogram {
    pub fn frequency(&self, bin: usize) -> f64 {
        self.f0 + bin as f64 * self.df
    }

    pub fn bins(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }
}

/// Hann-windowed short-time transform. Frames start every `hop` seconds
/// and only whole windows are used.
pub fn spectrogram(
    ir: &ImpulseResponse,
    window_len: f64,
    hop: f64,
    band: Band,
) -> Result<Spectrogram, SpectralError> {
    let fs = ir.sample_rate();
    let win = (window_len * fs).round() as usize;
    let step = (hop * fs).round() as usize;
    if step == 0 || !hop.is_finite() {
        return Err(SpectralError::InvalidHop);
    }
    if win == 0 || win > ir.len() {
        return Err(SpectralError::WindowTooLong {
            window: win,
            len: ir.len(),
        });
    }
    let window: Vec<f64> = (0..win)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / win as f64).cos())
        .collect();
    let df = fs / win as f64;
    let first = ((band.lo / df) - 1e-9).ceil().max(0.0) as usize;
    let last = ((band.hi / df + 1e-9).floor() as usize).min(win / 2);
    let fft = FftPlanner::new().plan_fft_forward(win);

    let mut times = Vec::new();
    let mut frames = Vec::new();
    let mut buf = vec![Complex::new(0.0, 0.0); win];
    let mut start = 0;
    while start + win <= ir.len() {
        for ((b, s), w) in buf.iter_mut().zip(&ir.samples()[start..]).zip(&window) {
            *b = Complex::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        let frame = if first <= last {
            buf[first..=last]
                .iter()
                .map(|c| amplitude_to_db(c.norm()))
                .collect()
        } else {
            Vec::new()
        };
        frames.push(frame);
        times.push((start as f64 + win as f64 / 2.0) / fs);
        start += step;
    }
    Ok(Spectrogram {
        times,
        f0: first as f64 * df,
        df,
        frames,
    })
}

/// How long the ridge at `freq` stays within `drop_db` of its level in the
/// first frame, with linear interpolation at the crossing. Returns `None`
/// if `freq` is outside the grid.
pub fn ridge_duration(sg: &Spectrogram, freq: f64, drop_db: f64) -> Option<f64> {
    let bin = ((freq - sg.f0) / sg.df).round();
    if bin < 0.0 || bin as usize >= sg.bins() {
        return None;
    }
    let bin = bin as usize;
    let levels: Vec<f64> = sg.frames.iter().map(|f| f[bin]).collect();
    let threshold = levels[0] - drop_db;
    for t in 1..levels.len() {
        if levels[t] < threshold {
            let (y0, y1) = (levels[t - 1], levels[t]);
            let frac = (y0 - threshold) / (y0 - y1);
            let cross = sg.times[t - 1] + frac * (sg.times[t] - sg.times[t - 1]);
            return Some(cross - sg.times[0]);
        }
    }
    Some(sg.times.last()? - sg.times[0])
}
