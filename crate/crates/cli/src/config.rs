//! Run parameters: built-in defaults, then a `key = value` file, then flags.

use std::path::{Path, PathBuf};

use roomtune::dataset::ChamberDataset;
use roomtune::fdtd::{Execution, ExperimentConfig, Placement, MAX_COURANT};
use roomtune::modal::{JndPolicy, DEFAULT_JND_HZ, DEFAULT_SPEED_OF_SOUND};
use roomtune::spectral::{Band, PeakOptions};
use serde_json::{json, Value};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub speed_of_sound: f64,
    pub jnd_hz: f64,
    pub band: Band,
    pub dx: f64,
    pub courant: f64,
    pub duration: f64,
    pub prominence: f64,
    pub savgol_window: usize,
    pub savgol_order: usize,
    pub out_dir: PathBuf,
    pub serial: bool,
    pub dataset: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let peaks = PeakOptions::default();
        let (savgol_window, savgol_order) = peaks.smoothing.unwrap_or((11, 3));
        let fdtd = ExperimentConfig::default();
        Self {
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            jnd_hz: DEFAULT_JND_HZ,
            band: peaks.band,
            dx: fdtd.dx,
            courant: MAX_COURANT,
            duration: fdtd.duration,
            prominence: peaks.min_prominence,
            savgol_window,
            savgol_order,
            out_dir: PathBuf::from("."),
            serial: false,
            dataset: None,
        }
    }
}

/// `20:150`, `20,150` or `20-150`.
pub fn parse_band(s: &str) -> Result<Band, String> {
    let (lo, hi) = s
        .split_once([':', ','])
        .or_else(|| s.split_once('-'))
        .ok_or_else(|| format!("band '{s}' is not of the form LO:HI"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|e| format!("band '{s}': {e}"))
    };
    Band::new(parse(lo)?, parse(hi)?).map_err(|e| e.to_string())
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(format!("'{other}' is not a boolean")),
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse::<T>()
        .map_err(|e| format!("'{}': {e}", s.trim()))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "speed-of-sound" => self.speed_of_sound = parse_num(value)?,
            "jnd-hz" => self.jnd_hz = parse_num(value)?,
            "band" => self.band = parse_band(value)?,
            "dx" => self.dx = parse_num(value)?,
            "courant" => self.courant = parse_num(value)?,
            "duration" => self.duration = parse_num(value)?,
            "prominence" => self.prominence = parse_num(value)?,
            "savgol-window" => self.savgol_window = parse_num(value)?,
            "savgol-order" => self.savgol_order = parse_num(value)?,
            "out-dir" => self.out_dir = PathBuf::from(value.trim()),
            "serial" => self.serial = parse_bool(value)?,
            "dataset" => self.dataset = Some(PathBuf::from(value.trim())),
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Applies a config file. Blank lines and `#` comments are skipped.
    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::io(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    n + 1
                ))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| CliError::io(format!("{}:{}: {e}", path.display(), n + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("speed-of-sound", self.speed_of_sound),
            ("jnd-hz", self.jnd_hz),
            ("dx", self.dx),
            ("courant", self.courant),
            ("duration", self.duration),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::validation(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.courant > MAX_COURANT * (1.0 + 1e-12) {
            return Err(CliError::validation(format!(
                "courant {} exceeds the stability limit {MAX_COURANT:.6}",
                self.courant
            )));
        }
        if !(self.prominence.is_finite() && self.prominence >= 0.0) {
            return Err(CliError::validation(format!(
                "prominence must be non-negative, got {}",
                self.prominence
            )));
        }
        if self.savgol_window.is_multiple_of(2) || self.savgol_order >= self.savgol_window {
            return Err(CliError::validation(format!(
                "savgol-window must be odd and larger than savgol-order, got {} and {}",
                self.savgol_window, self.savgol_order
            )));
        }
        Ok(())
    }

    pub fn jnd(&self) -> Result<JndPolicy, CliError> {
        Ok(JndPolicy::new(self.jnd_hz)?)
    }

    pub fn dataset(&self) -> Result<ChamberDataset, CliError> {
        match &self.dataset {
            None => Ok(ChamberDataset::bundled()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
                ChamberDataset::from_csv(&text).map_err(|e| match e {
                    roomtune::dataset::DatasetError::Csv(_) => {
                        CliError::io(format!("{}: {e}", path.display()))
                    }
                    other => CliError::validation(format!("{}: {other}", path.display())),
                })
            }
        }
    }

    pub fn peak_options(&self, smoothed: bool) -> PeakOptions {
        PeakOptions {
            band: self.band,
            min_prominence: self.prominence,
            smoothing: smoothed.then_some((self.savgol_window, self.savgol_order)),
        }
    }

    pub fn experiment(&self, placement: Placement) -> ExperimentConfig {
        ExperimentConfig {
            c: self.speed_of_sound,
            dx: self.dx,
            courant: self.courant,
            duration: self.duration,
            placement,
            band: self.band,
            execution: if self.serial {
                Execution::Serial
            } else {
                Execution::Parallel
            },
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "speed-of-sound": self.speed_of_sound,
            "jnd-hz": self.jnd_hz,
            "band": [self.band.lo, self.band.hi],
            "dx": self.dx,
            "courant": self.courant,
            "duration": self.duration,
            "prominence": self.prominence,
            "savgol-window": self.savgol_window,
            "savgol-order": self.savgol_order,
            "out-dir": self.out_dir,
            "serial": self.serial,
            "dataset": self.dataset,
        })
    }
}
