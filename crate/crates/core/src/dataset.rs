//! The surveyed chamber boxes, the measured peak list, and the reference
//! association table used as a regression fixture.

use std::collections::HashSet;
use std::fmt;

use serde::Deserialize;
use thiserror::Error;

use crate::modal::{AssociationRow, Chamber, ModeIndex};

/// Prominent peaks of the site-wide mean spectrum, Hz.
pub const PROMINENT_PEAKS_HZ: [f64; 9] = [37.2, 41.0, 46.1, 50.4, 57.1, 64.3, 72.7, 81.8, 92.5];

/// The peaks that head rows of the reference association table, Hz.
/// 37.2 Hz has no row there.
pub const TABLE1_PEAKS_HZ: [f64; 8] = [41.0, 46.1, 50.4, 57.1, 64.3, 72.7, 81.8, 92.5];

/// Chambers whose mean responses make up the site-wide mean.
pub const SITE_CHAMBERS: [&str; 6] = ["18", "20", "24", "25", "26", "27"];

const BUNDLED_CHAMBERS: &str = include_str!("../data/chambers.csv");
const TABLE1_EXPECTED: &str = include_str!("../data/table1_expected.csv");

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("chamber csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("duplicate chamber label '{0}'")]
    DuplicateLabel(String),
    #[error("chamber {label}: invalid {field} '{value}'")]
    InvalidDimension {
        label: String,
        field: &'static str,
        value: String,
    },
    #[error("unknown chamber '{0}'")]
    UnknownChamber(String),
    #[error("invalid mode '{0}'")]
    InvalidMode(String),
}

#[derive(Debug, Deserialize)]
struct ChamberRecord {
    label: String,
    lx_cm: String,
    ly_cm: String,
    lz_cm: String,
}

/// Chamber boxes keyed by label. Dimensions are given in centimeters on
/// disk; an empty or `unknown` entry marks an unmeasured wall.
#[derive(Debug, Clone, PartialEq)]
pub struct ChamberDataset {
    chambers: Vec<Chamber>,
}

impl ChamberDataset {
    pub fn bundled() -> Self {
        Self::from_csv(BUNDLED_CHAMBERS).expect("bundled chamber table is valid")
    }

    pub fn empty() -> Self {
        Self {
            chambers: Vec::new(),
        }
    }

    pub fn from_csv(text: &str) -> Result<Self, DatasetError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut seen = HashSet::new();
        let mut chambers = Vec::new();
        for record in reader.deserialize::<ChamberRecord>() {
            let rec = record?;
            if !seen.insert(rec.label.clone()) {
                return Err(DatasetError::DuplicateLabel(rec.label));
            }
            let parse = |field: &'static str, raw: &str| -> Result<Option<f64>, DatasetError> {
                if raw.is_empty() || raw.eq_ignore_ascii_case("unknown") {
                    return Ok(None);
                }
                match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() && v > 0.0 => Ok(Some(v / 100.0)),
                    _ => Err(DatasetError::InvalidDimension {
                        label: rec.label.clone(),
                        field,
                        value: raw.to_string(),
                    }),
                }
            };
            let extents = [
                parse("lx_cm", &rec.lx_cm)?,
                parse("ly_cm", &rec.ly_cm)?,
                parse("lz_cm", &rec.lz_cm)?,
            ];
            chambers.push(Chamber::new(rec.label, extents));
        }
        Ok(Self { chambers })
    }

    pub fn chambers(&self) -> &[Chamber] {
        &self.chambers
    }

    pub fn is_empty(&self) -> bool {
        self.chambers.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&Chamber> {
        self.chambers.iter().find(|c| c.label == label)
    }

    /// Chambers for the given labels, in the order asked for.
    pub fn select<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<Chamber>, DatasetError> {
        labels
            .iter()
            .map(|l| {
                self.get(l.as_ref())
                    .cloned()
                    .ok_or_else(|| DatasetError::UnknownChamber(l.as_ref().to_string()))
            })
            .collect()
    }
}

/// One reference association row with its printed wall bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedRow {
    pub peak_hz: f64,
    pub chamber: String,
    pub mode: ModeIndex,
    pub modal_freq_hz: f64,
    /// `(wall_cm, bound_cm)` per involved wall, x before y before z.
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Deserialize)]
struct ExpectedRecord {
    peak_hz: f64,
    chamber: String,
    mode: String,
    modal_freq_hz: f64,
    wall_cm: f64,
    bound_cm: f64,
}

/// The reference table, one entry per (peak, chamber) row.
pub fn table1_expected() -> Vec<ExpectedRow> {
    parse_expected(TABLE1_EXPECTED).expect("bundled table fixture is valid")
}

pub fn parse_expected(text: &str) -> Result<Vec<ExpectedRow>, DatasetError> {
    let mut rows: Vec<ExpectedRow> = Vec::new();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    for record in reader.deserialize::<ExpectedRecord>() {
        let rec = record?;
        let mode: ModeIndex = rec
            .mode
            .parse()
            .map_err(|_| DatasetError::InvalidMode(rec.mode.clone()))?;
        match rows.last_mut() {
            Some(last) if last.peak_hz == rec.peak_hz && last.chamber == rec.chamber => {
                last.bounds.push((rec.wall_cm, rec.bound_cm));
            }
            _ => rows.push(ExpectedRow {
                peak_hz: rec.peak_hz,
                chamber: rec.chamber,
                mode,
                modal_freq_hz: rec.modal_freq_hz,
                bounds: vec![(rec.wall_cm, rec.bound_cm)],
            }),
        }
    }
    Ok(rows)
}

/// Tolerances covering the reference table's printed rounding.
#[derive(Debug, Clone, Copy)]
pub struct DiffTolerance {
    pub freq_hz: f64,
    pub bound_cm: f64,
}

impl Default for DiffTolerance {
    fn default() -> Self {
        Self {
            freq_hz: 0.1,
            bound_cm: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableDiff {
    Missing {
        peak_hz: f64,
        chamber: String,
        mode: ModeIndex,
    },
    Extra {
        peak_hz: f64,
        chamber: String,
        mode: ModeIndex,
    },
    ModeMismatch {
        peak_hz: f64,
        chamber: String,
        expected: ModeIndex,
        got: ModeIndex,
    },
    Frequency {
        peak_hz: f64,
        chamber: String,
        expected: f64,
        got: f64,
    },
    Bound {
        peak_hz: f64,
        chamber: String,
        wall_cm: f64,
        expected: f64,
        got: Option<f64>,
    },
}

impl fmt::Display for TableDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableDiff::Missing { peak_hz, chamber, mode } => {
                write!(f, "{peak_hz:.1} Hz, chamber {chamber}: expected {mode}, no mode within JND")
            }
            TableDiff::Extra { peak_hz, chamber, mode } => {
                write!(f, "{peak_hz:.1} Hz, chamber {chamber}: extra row {mode} not in table")
            }
            TableDiff::ModeMismatch {
                peak_hz,
                chamber,
                expected,
                got,
            } => write!(f, "{peak_hz:.1} Hz, chamber {chamber}: table lists {expected}, closest mode is {got}"),
            TableDiff::Frequency {
                peak_hz,
                chamber,
                expected,
                got,
            } => write!(f, "{peak_hz:.1} Hz, chamber {chamber}: modal frequency {got:.2} vs printed {expected:.1}"),
            TableDiff::Bound {
                peak_hz,
                chamber,
                wall_cm,
                expected,
                got,
            } => match got {
                Some(g) => write!(f, "{peak_hz:.1} Hz, chamber {chamber}: wall {wall_cm:.0} bound {g:.2} vs printed {expected:.1}"),
                None => write!(f, "{peak_hz:.1} Hz, chamber {chamber}: wall {wall_cm:.0} has no computed bound"),
            },
        }
    }
}

fn same_peak(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-6
}

/// Row-by-row comparison of computed associations against the reference
/// table. Only peaks present in `produced` or `expected` are considered.
pub fn diff_table1(
    produced: &[AssociationRow],
    expected: &[ExpectedRow],
    tol: DiffTolerance,
) -> Vec<TableDiff> {
    let mut diffs = Vec::new();
    for exp in expected {
        let got = produced
            .iter()
            .find(|r| same_peak(r.peak_hz, exp.peak_hz) && r.chamber == exp.chamber);
        let Some(got) = got else {
            diffs.push(TableDiff::Missing {
                peak_hz: exp.peak_hz,
                chamber: exp.chamber.clone(),
                mode: exp.mode,
            });
            continue;
        };
        if got.mode != exp.mode {
            diffs.push(TableDiff::ModeMismatch {
                peak_hz: exp.peak_hz,
                chamber: exp.chamber.clone(),
                expected: exp.mode,
                got: got.mode,
            });
            continue;
        }
        if (got.modal_freq_hz - exp.modal_freq_hz).abs() > tol.freq_hz {
            diffs.push(TableDiff::Frequency {
                peak_hz: exp.peak_hz,
                chamber: exp.chamber.clone(),
                expected: exp.modal_freq_hz,
                got: got.modal_freq_hz,
            });
        }
        for &(wall_cm, bound_cm) in &exp.bounds {
            let computed = got
                .bounds
                .iter()
                .find(|b| (b.wall_cm - wall_cm).abs() < 0.5)
                .map(|b| b.bound_cm);
            if computed.is_none_or(|c| (c - bound_cm).abs() > tol.bound_cm) {
                diffs.push(TableDiff::Bound {
                    peak_hz: exp.peak_hz,
                    chamber: exp.chamber.clone(),
                    wall_cm,
                    expected: bound_cm,
                    got: computed,
                });
            }
        }
    }
    for row in produced {
        let listed = expected
            .iter()
            .any(|e| same_peak(e.peak_hz, row.peak_hz) && e.chamber == row.chamber);
        if !listed {
            diffs.push(TableDiff::Extra {
                peak_hz: row.peak_hz,
                chamber: row.chamber.clone(),
                mode: row.mode,
            });
        }
    }
    diffs
}
