//! Rectangular-box room modes and their sensitivity to wall placement.
//!
//! A box of dimensions `(Lx, Ly, Lz)` with rigid walls has resonances at
//!
//! ```text
//! f = c/2 * sqrt((nx/Lx)^2 + (ny/Ly)^2 + (nz/Lz)^2)
//! ```
//!
//! and moving wall `i` by `dL` shifts a mode by approximately
//! `df = -c^2 n_i^2 / (4 f L_i^3) * dL`. Inverting that for a fixed
//! audible shift gives the distance a wall may move before a listener
//! would notice the mode detune.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Axis, BoxRoom};

/// Speed of sound used unless a run overrides it, m/s.
pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Just-noticeable frequency difference below 500 Hz, Hz.
pub const DEFAULT_JND_HZ: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModalError {
    #[error("mode index (0,0,0) is not a mode")]
    ZeroIndex,
    #[error("chamber {chamber}: {axis} dimension is unknown but mode {index} uses it")]
    UnknownDimension {
        chamber: String,
        axis: Axis,
        index: ModeIndex,
    },
    #[error("mode {index} does not involve the {axis} wall, so its bound is unbounded")]
    AxisNotInMode { index: ModeIndex, axis: Axis },
    #[error("JND must be positive and finite, got {0} Hz")]
    InvalidJnd(f64),
    #[error("speed of sound must be positive and finite, got {0} m/s")]
    InvalidSpeed(f64),
    #[error("ratio analysis needs at least two ascending peaks")]
    TooFewPeaks,
    #[error("peaks must be positive and strictly ascending ({0} Hz then {1} Hz)")]
    NotAscending(f64, f64),
}

/// Anything with (possibly unknown) box dimensions in meters.
pub trait Extents {
    fn label(&self) -> &str;
    fn extent(&self, axis: Axis) -> Option<f64>;
}

impl Extents for BoxRoom {
    fn label(&self) -> &str {
        BoxRoom::label(self)
    }

    fn extent(&self, axis: Axis) -> Option<f64> {
        Some(self.length(axis))
    }
}

/// A chamber as catalogued: some dimensions may not have been measured.
/// Modes along an unknown axis are never enumerated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chamber {
    pub label: String,
    pub extents: [Option<f64>; 3],
}

impl Chamber {
    pub fn new(label: impl Into<String>, extents: [Option<f64>; 3]) -> Self {
        Self {
            label: label.into(),
            extents,
        }
    }

    /// The full box, when every dimension is known.
    pub fn box_room(&self) -> Option<BoxRoom> {
        let [x, y, z] = self.extents;
        BoxRoom::new(self.label.clone(), x?, y?, z?).ok()
    }
}

impl From<&BoxRoom> for Chamber {
    fn from(room: &BoxRoom) -> Self {
        Self::new(room.label(), room.dims().map(Some))
    }
}

impl Extents for Chamber {
    fn label(&self) -> &str {
        &self.label
    }

    fn extent(&self, axis: Axis) -> Option<f64> {
        self.extents[axis.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex([u32; 3]);

impl ModeIndex {
    pub fn new(nx: u32, ny: u32, nz: u32) -> Result<Self, ModalError> {
        if nx == 0 && ny == 0 && nz == 0 {
            return Err(ModalError::ZeroIndex);
        }
        Ok(Self([nx, ny, nz]))
    }

    pub fn get(self, axis: Axis) -> u32 {
        self.0[axis.index()]
    }

    pub fn components(self) -> [u32; 3] {
        self.0
    }

    /// Axes with a nonzero index, in x, y, z order.
    pub fn axes(self) -> impl Iterator<Item = Axis> {
        Axis::ALL.into_iter().filter(move |&a| self.get(a) > 0)
    }

    /// 1 = axial, 2 = tangential, 3 = oblique.
    pub fn order(self) -> usize {
        self.axes().count()
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [x, y, z] = self.0;
        write!(f, "({x},{y},{z})")
    }
}

impl FromStr for ModeIndex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<u32> = inner
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("invalid mode index '{s}': {e}"))?;
        match parts[..] {
            [x, y, z] => ModeIndex::new(x, y, z).map_err(|e| e.to_string()),
            _ => Err(format!("mode index '{s}' needs three components")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mode {
    pub chamber: String,
    pub index: ModeIndex,
    pub frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JndPolicy {
    delta_f: f64,
}

impl JndPolicy {
    pub fn new(delta_f: f64) -> Result<Self, ModalError> {
        if delta_f.is_finite() && delta_f > 0.0 {
            Ok(Self { delta_f })
        } else {
            Err(ModalError::InvalidJnd(delta_f))
        }
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }
}

impl Default for JndPolicy {
    fn default() -> Self {
        Self {
            delta_f: DEFAULT_JND_HZ,
        }
    }
}

fn check_speed(c: f64) -> Result<(), ModalError> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(ModalError::InvalidSpeed(c))
    }
}

fn known_extent<R: Extents + ?Sized>(
    room: &R,
    idx: ModeIndex,
    axis: Axis,
) -> Result<f64, ModalError> {
    room.extent(axis)
        .ok_or_else(|| ModalError::UnknownDimension {
            chamber: room.label().to_string(),
            axis,
            index: idx,
        })
}

pub fn mode_frequency<R: Extents + ?Sized>(
    room: &R,
    idx: ModeIndex,
    c: f64,
) -> Result<f64, ModalError> {
    check_speed(c)?;
    let mut sum = 0.0;
    for axis in idx.axes() {
        let l = known_extent(room, idx, axis)?;
        let n = f64::from(idx.get(axis));
        sum += (n / l).powi(2);
    }
    Ok(0.5 * c * sum.sqrt())
}

/// All modes up to `f_max`, ascending by frequency (ties by index).
pub fn enumerate_modes<R: Extents + ?Sized>(room: &R, c: f64, f_max: f64) -> Vec<Mode> {
    if check_speed(c).is_err() || !(f_max.is_finite() && f_max > 0.0) {
        return Vec::new();
    }
    let bound = |axis: Axis| -> u32 {
        room.extent(axis)
            .map_or(0, |l| (2.0 * f_max * l / c).ceil() as u32)
    };
    let [bx, by, bz] = Axis::ALL.map(bound);
    let mut modes = Vec::new();
    for nx in 0..=bx {
        for ny in 0..=by {
            for nz in 0..=bz {
                let Ok(index) = ModeIndex::new(nx, ny, nz) else {
                    continue;
                };
                let frequency =
                    mode_frequency(room, index, c).expect("axes bounded to known extents");
                if frequency <= f_max {
                    modes.push(Mode {
                        chamber: room.label().to_string(),
                        index,
                        frequency,
                    });
                }
            }
        }
    }
    modes.sort_by(|a, b| {
        a.frequency
            .total_cmp(&b.frequency)
            .then(a.index.cmp(&b.index))
    });
    modes
}

/// Partial derivative of the mode frequency with respect to wall length
/// `axis`, in Hz per meter. Zero when the mode does not involve that wall.
pub fn sensitivity<R: Extents + ?Sized>(
    room: &R,
    idx: ModeIndex,
    axis: Axis,
    c: f64,
) -> Result<f64, ModalError> {
    let f = mode_frequency(room, idx, c)?;
    let n = f64::from(idx.get(axis));
    if n == 0.0 {
        return Ok(0.0);
    }
    let l = known_extent(room, idx, axis)?;
    Ok(-(c * c) * n * n / (4.0 * f * l.powi(3)))
}

/// Wall displacement (cm) that detunes the mode by the policy's JND.
pub fn jnd_bound<R: Extents + ?Sized>(
    room: &R,
    idx: ModeIndex,
    axis: Axis,
    c: f64,
    policy: JndPolicy,
) -> Result<f64, ModalError> {
    if idx.get(axis) == 0 {
        return Err(ModalError::AxisNotInMode { index: idx, axis });
    }
    let s = sensitivity(room, idx, axis, c)?;
    Ok(policy.delta_f() / s.abs() * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WallBound {
    pub axis: Axis,
    pub wall_cm: f64,
    pub bound_cm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssociationRow {
    pub peak_hz: f64,
    pub chamber: String,
    pub mode: ModeIndex,
    pub modal_freq_hz: f64,
    pub bounds: Vec<WallBound>,
}

/// For every peak and every chamber, the closest box mode within the JND,
/// with the wall bound for each wall the mode involves. Peaks are
/// processed in ascending order; chambers keep their input order.
pub fn associate<R: Extents>(
    peaks: &[f64],
    chambers: &[R],
    c: f64,
    policy: JndPolicy,
) -> Vec<AssociationRow> {
    let mut sorted: Vec<f64> = peaks.iter().copied().filter(|p| p.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let Some(&highest) = sorted.last() else {
        return Vec::new();
    };
    let catalog: Vec<Vec<Mode>> = chambers
        .iter()
        .map(|ch| enumerate_modes(ch, c, highest + policy.delta_f()))
        .collect();

    let mut rows = Vec::new();
    for &peak in &sorted {
        for (chamber, modes) in chambers.iter().zip(&catalog) {
            let best = modes
                .iter()
                .filter(|m| (m.frequency - peak).abs() <= policy.delta_f())
                .min_by(|a, b| {
                    let da = (a.frequency - peak).abs();
                    let db = (b.frequency - peak).abs();
                    da.partial_cmp(&db).unwrap_or(Ordering::Equal)
                });
            let Some(mode) = best else { continue };
            let bounds = mode
                .index
                .axes()
                .map(|axis| WallBound {
                    axis,
                    wall_cm: chamber.extent(axis).expect("enumerated on known axes") * 100.0,
                    bound_cm: jnd_bound(chamber, mode.index, axis, c, policy)
                        .expect("axis participates in mode"),
                })
                .collect();
            rows.push(AssociationRow {
                peak_hz: peak,
                chamber: chamber.label().to_string(),
                mode: mode.index,
                modal_freq_hz: mode.frequency,
                bounds,
            });
        }
    }
    rows
}

/// The two just-intonation whole tones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WholeTone {
    /// 10:9
    Minor,
    /// 9:8
    Major,
}

impl WholeTone {
    pub fn ratio(self) -> f64 {
        match self {
            WholeTone::Minor => 10.0 / 9.0,
            WholeTone::Major => 9.0 / 8.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            WholeTone::Minor => "10:9",
            WholeTone::Major => "9:8",
        }
    }
}

pub fn cents(ratio: f64) -> f64 {
    1200.0 * ratio.log2()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub lower_hz: f64,
    pub upper_hz: f64,
    pub ratio: f64,
    pub nearest: WholeTone,
    /// Signed deviation from the nearest whole tone.
    pub cents: f64,
}

impl RatioRow {
    pub fn conforms(&self, tolerance_cents: f64) -> bool {
        self.cents.abs() <= tolerance_cents
    }
}

/// Ratio of each consecutive peak pair and its distance from the nearer
/// whole tone.
pub fn ratio_analysis(peaks: &[f64]) -> Result<Vec<RatioRow>, ModalError> {
    if peaks.len() < 2 {
        return Err(ModalError::TooFewPeaks);
    }
    peaks
        .windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(ModalError::NotAscending(lo, hi));
            }
            let ratio = hi / lo;
            let [minor, major] =
                [WholeTone::Minor, WholeTone::Major].map(|t| (t, cents(ratio / t.ratio())));
            let (nearest, dev) = if minor.1.abs() < major.1.abs() {
                minor
            } else {
                major
            };
            Ok(RatioRow {
                lower_hz: lo,
                upper_hz: hi,
                ratio,
                nearest,
                cents: dev,
            })
        })
        .collect()
}
