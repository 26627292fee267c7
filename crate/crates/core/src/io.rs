//! File formats: WAV with a JSON sidecar, CSV tables and gnuplot blocks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{ImpulseResponse, SignalError};
use crate::spectral::{Peak, Spectrogram, Spectrum};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: expected a mono file, found {channels} channels")]
    NotMono { path: PathBuf, channels: u16 },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Signal {
        path: PathBuf,
        #[source]
        source: SignalError,
    },
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn wav_err(path: &Path) -> impl FnOnce(hound::Error) -> IoError + '_ {
    move |source| IoError::Wav {
        path: path.to_path_buf(),
        source,
    }
}

/// Exact timing of a WAV file whose header can only hold an integer rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavSidecar {
    pub sample_rate: f64,
    pub dt: f64,
    pub samples: usize,
}

/// `out.wav` → `out.wav.json`.
pub fn sidecar_path(wav: &Path) -> PathBuf {
    let mut name = wav.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let file = File::create(path).map_err(file_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    w.write_all(b"\n").map_err(file_err(path))?;
    w.flush().map_err(file_err(path))
}

/// 32-bit float mono WAV at the rounded sample rate, plus a sidecar with
/// the exact rate.
pub fn write_wav(path: &Path, ir: &ImpulseResponse) -> Result<(), IoError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: ir.sample_rate().round().max(1.0) as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wav_err(path))?;
    for &s in ir.samples() {
        w.write_sample(s as f32).map_err(wav_err(path))?;
    }
    w.finalize().map_err(wav_err(path))?;
    write_json(
        &sidecar_path(path),
        &WavSidecar {
            sample_rate: ir.sample_rate(),
            dt: 1.0 / ir.sample_rate(),
            samples: ir.len(),
        },
    )
}

/// Mono WAV (float or integer PCM, integers scaled to [-1, 1)). The
/// sidecar's exact rate is used when present and consistent with the
/// header.
pub fn read_wav(path: &Path) -> Result<ImpulseResponse, IoError> {
    let mut r = hound::WavReader::open(path).map_err(wav_err(path))?;
    let spec = r.spec();
    if spec.channels != 1 {
        return Err(IoError::NotMono {
            path: path.to_path_buf(),
            channels: spec.channels,
        });
    }
    let samples: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => r
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(wav_err(path))?,
        hound::SampleFormat::Int => {
            let scale = 2f64.powi(i32::from(spec.bits_per_sample) - 1);
            r.samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<Result<_, _>>()
                .map_err(wav_err(path))?
        }
    };
    let mut rate = f64::from(spec.sample_rate);
    let side = sidecar_path(path);
    if side.exists() {
        let text = std::fs::read_to_string(&side).map_err(file_err(&side))?;
        let meta: WavSidecar = serde_json::from_str(&text).map_err(|source| IoError::Json {
            path: side.clone(),
            source,
        })?;
        if meta.sample_rate.round() == rate && meta.samples == samples.len() {
            rate = meta.sample_rate;
        }
    }
    ImpulseResponse::new(rate, samples).map_err(|source| IoError::Signal {
        path: path.to_path_buf(),
        source,
    })
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(file_err(path))
}

pub fn write_ir_csv(path: &Path, ir: &ImpulseResponse) -> Result<(), IoError> {
    let fs = ir.sample_rate();
    write_rows(
        path,
        &["time_s", "pressure"],
        ir.samples()
            .iter()
            .enumerate()
            .map(|(i, p)| [format!("{:?}", i as f64 / fs), format!("{p:?}")]),
    )
}

fn read_columns(path: &Path, want: usize) -> Result<Vec<Vec<f64>>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        if rec.len() < want {
            return Err(IoError::Format {
                path: path.to_path_buf(),
                message: format!(
                    "row {} has {} columns, expected {want}",
                    line + 2,
                    rec.len()
                ),
            });
        }
        let row = rec
            .iter()
            .take(want)
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| IoError::Format {
                path: path.to_path_buf(),
                message: format!("row {}: {e}", line + 2),
            })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Uniform spacing of a column, or a format error.
fn uniform_step(path: &Path, values: &[f64], what: &str) -> Result<f64, IoError> {
    let bad = |message: String| IoError::Format {
        path: path.to_path_buf(),
        message,
    };
    if values.len() < 2 {
        return Err(bad(format!("need at least two {what} rows")));
    }
    let step = (values[values.len() - 1] - values[0]) / (values.len() - 1) as f64;
    if !(step.is_finite() && step > 0.0) {
        return Err(bad(format!("{what} column must increase")));
    }
    for (i, w) in values.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > 1e-6 * step.max(1.0) {
            return Err(bad(format!(
                "{what} column is not uniformly spaced at row {}",
                i + 3
            )));
        }
    }
    Ok(step)
}

/// Reads the `time_s,pressure` layout of [`write_ir_csv`].
pub fn read_ir_csv(path: &Path) -> Result<ImpulseResponse, IoError> {
    let rows = read_columns(path, 2)?;
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let dt = uniform_step(path, &times, "time")?;
    ImpulseResponse::new(1.0 / dt, rows.into_iter().map(|r| r[1]).collect()).map_err(|source| {
        IoError::Signal {
            path: path.to_path_buf(),
            source,
        }
    })
}

/// WAV or CSV by extension.
pub fn read_ir(path: &Path) -> Result<ImpulseResponse, IoError> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("wav") => read_wav(path),
        Some("csv") => read_ir_csv(path),
        _ => Err(IoError::Format {
            path: path.to_path_buf(),
            message: "expected a .wav or .csv impulse response".into(),
        }),
    }
}

pub fn write_spectrum_csv(path: &Path, s: &Spectrum) -> Result<(), IoError> {
    write_rows(
        path,
        &["frequency_hz", "magnitude_db"],
        s.magnitudes_db()
            .iter()
            .enumerate()
            .map(|(k, m)| [format!("{:?}", s.frequency(k)), format!("{m:?}")]),
    )
}

pub fn read_spectrum_csv(path: &Path) -> Result<Spectrum, IoError> {
    let rows = read_columns(path, 2)?;
    let freqs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let df = uniform_step(path, &freqs, "frequency")?;
    Ok(Spectrum::from_db(
        freqs[0],
        df,
        rows.into_iter().map(|r| r[1]).collect(),
    ))
}

/// Long format: one row per (time, frequency) cell.
pub fn write_spectrogram_csv(path: &Path, sg: &Spectrogram) -> Result<(), IoError> {
    write_rows(
        path,
        &["time_s", "frequency_hz", "magnitude_db"],
        sg.times.iter().zip(&sg.frames).flat_map(|(t, frame)| {
            frame.iter().enumerate().map(move |(k, m)| {
                [
                    format!("{t:?}"),
                    format!("{:?}", sg.frequency(k)),
                    format!("{m:?}"),
                ]
            })
        }),
    )
}

pub fn write_peaks_csv(path: &Path, peaks: &[Peak]) -> Result<(), IoError> {
    write_rows(
        path,
        &["frequency_hz", "magnitude_db", "prominence_db", "fwhm_hz"],
        peaks.iter().map(|p| {
            [
                format!("{:.4}", p.frequency),
                format!("{:.4}", p.magnitude),
                format!("{:.4}", p.prominence),
                format!("{:.4}", p.fwhm),
            ]
        }),
    )
}

/// Generic CSV with a header; used for the CLI reports.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), IoError> {
    write_rows(path, header, rows.iter().map(|r| r.iter().cloned()))
}

/// Gnuplot inline data block `$name << EOD ... EOD`, one block per
/// spectrum, columns frequency and dB.
pub fn gnuplot_spectra(blocks: &[(&str, &Spectrum)]) -> String {
    let mut out = String::new();
    for (name, s) in blocks {
        out.push_str(&format!("${name} << EOD\n"));
        for (k, m) in s.magnitudes_db().iter().enumerate() {
            out.push_str(&format!("{:.6} {:.6}\n", s.frequency(k), m));
        }
        out.push_str("EOD\n");
    }
    out
}

/// Gnuplot block for a spectrogram in `splot ... with pm3d` layout: rows
/// grouped by time and separated by blank lines.
pub fn gnuplot_spectrogram(name: &str, sg: &Spectrogram) -> String {
    let mut out = format!("${name} << EOD\n");
    for (t, frame) in sg.times.iter().zip(&sg.frames) {
        for (k, m) in frame.iter().enumerate() {
            out.push_str(&format!("{t:.6} {:.6} {m:.6}\n", sg.frequency(k)));
        }
        out.push('\n');
    }
    out.push_str("EOD\n");
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(file_err(path))
}
