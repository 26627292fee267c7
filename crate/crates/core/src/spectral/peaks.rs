use serde::Serialize;

use super::{smooth, Band, SpectralError, Spectrum};

/// Drop below the peak, in dB, at which the width is read (half power).
const HALF_POWER_DB: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    /// Parabolic-interpolated center, Hz.
    pub frequency: f64,
    pub magnitude: f64,
    /// Height above the higher of the two surrounding saddles, dB.
    pub prominence: f64,
    pub fwhm: f64,
}

/// How peaks are picked from a spectrum in the analysis pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakOptions {
    pub band: Band,
    pub min_prominence: f64,
    /// Savitzky-Golay `(window, order)` applied before picking; `None`
    /// picks on the raw spectrum.
    pub smoothing: Option<(usize, usize)>,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            band: Band::default(),
            min_prominence: 10.0,
            smoothing: Some((11, 3)),
        }
    }
}

impl PeakOptions {
    /// Picking on the unsmoothed spectrum. Lossless simulated modes are
    /// one or two bins wide, so smoothing erodes their prominence.
    pub fn raw() -> Self {
        Self {
            smoothing: None,
            ..Self::default()
        }
    }
}

/// Smooth (if configured) then detect.
pub fn find_peaks(s: &Spectrum, opts: &PeakOptions) -> Result<Vec<Peak>, SpectralError> {
    Ok(match opts.smoothing {
        Some((window, order)) => {
            detect_peaks(&smooth(s, window, order)?, opts.min_prominence, opts.band)
        }
        None => detect_peaks(s, opts.min_prominence, opts.band),
    })
}

/// Local maxima inside `band` whose topographic prominence reaches
/// `min_prominence` dB, ascending in frequency. Bins at the band edges
/// cannot be peaks.
pub fn detect_peaks(s: &Spectrum, min_prominence: f64, band: Band) -> Vec<Peak> {
    let cropped = s.crop(band);
    let v = cropped.magnitudes_db();
    let n = v.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if v[i] <= v[i - 1] {
            i += 1;
            continue;
        }
        // walk across a plateau; its middle is the candidate
        let mut j = i;
        while j + 1 < n && v[j + 1] == v[i] {
            j += 1;
        }
        if j + 1 < n && v[j + 1] < v[i] {
            let center = (i + j) / 2;
            if let Some(p) = measure(&cropped, center, i, j) {
                if p.prominence >= min_prominence {
                    peaks.push(p);
                }
            }
        }
        i = j + 1;
    }
    peaks
}

fn measure(s: &Spectrum, center: usize, plateau_lo: usize, plateau_hi: usize) -> Option<Peak> {
    let v = s.magnitudes_db();
    let top = v[center];

    // bases: lowest point before the signal climbs above this peak
    let mut left_min = top;
    let mut left_base = plateau_lo;
    for k in (0..plateau_lo).rev() {
        if v[k] > top {
            break;
        }
        if v[k] < left_min {
            left_min = v[k];
            left_base = k;
        }
    }
    let mut right_min = top;
    let mut right_base = plateau_hi;
    for (k, &val) in v.iter().enumerate().skip(plateau_hi + 1) {
        if val > top {
            break;
        }
        if val < right_min {
            right_min = val;
            right_base = k;
        }
    }
    let prominence = top - left_min.max(right_min);
    if prominence <= 0.0 {
        return None;
    }

    let (a, b, c) = (v[center - 1], v[center], v[center + 1]);
    let curvature = a - 2.0 * b + c;
    let delta = if curvature < 0.0 {
        (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let frequency = s.frequency(center) + delta * s.df();
    let magnitude = b - 0.25 * (a - c) * delta;

    // Both bases sit at least `prominence` below the top, so the level
    // is crossed on each side before reaching them.
    let level = top - HALF_POWER_DB.min(0.5 * prominence);
    let mut l = center;
    while l > left_base && v[l - 1] > level {
        l -= 1;
    }
    let left_x = (l - 1) as f64 + (level - v[l - 1]) / (v[l] - v[l - 1]);
    let mut r = center;
    while r < right_base && v[r + 1] > level {
        r += 1;
    }
    let right_x = r as f64 + (v[r] - level) / (v[r] - v[r + 1]);
    let fwhm = (right_x - left_x) * s.df();

    (fwhm > 0.0).then_some(Peak {
        frequency,
        magnitude,
        prominence,
        fwhm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakSpread {
    pub reference_hz: f64,
    /// Number of spectra with a peak within the matching radius.
    pub matches: usize,
    pub mean_frequency: f64,
    pub frequency_std: f64,
    pub magnitude_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakVariation {
    pub peaks: Vec<PeakSpread>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Spread of each reference peak across repeated spectra. Each spectrum
/// contributes its detected peak nearest the reference, if within
/// `radius_hz`; standard deviations are sample (n - 1) estimates.
pub fn peak_variation(
    spectra: &[Spectrum],
    reference: &[Peak],
    radius_hz: f64,
    opts: &PeakOptions,
) -> Result<PeakVariation, SpectralError> {
    if spectra.len() < 2 {
        return Err(SpectralError::TooFewSpectra(spectra.len()));
    }
    let detected = spectra
        .iter()
        .map(|s| find_peaks(s, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let peaks = reference
        .iter()
        .map(|r| {
            let matched: Vec<&Peak> = detected
                .iter()
                .filter_map(|ps| {
                    ps.iter()
                        .filter(|p| (p.frequency - r.frequency).abs() <= radius_hz)
                        .min_by(|a, b| {
                            (a.frequency - r.frequency)
                                .abs()
                                .total_cmp(&(b.frequency - r.frequency).abs())
                        })
                })
                .collect();
            let freqs: Vec<f64> = matched.iter().map(|p| p.frequency).collect();
            let mags: Vec<f64> = matched.iter().map(|p| p.magnitude).collect();
            let (mean_frequency, frequency_std) = mean_std(&freqs);
            let (_, magnitude_std) = mean_std(&mags);
            PeakSpread {
                reference_hz: r.frequency,
                matches: matched.len(),
                mean_frequency,
                frequency_std,
                magnitude_std,
            }
        })
        .collect();
    Ok(PeakVariation { peaks })
}
