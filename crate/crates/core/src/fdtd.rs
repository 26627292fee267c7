//! Explicit leapfrog solver for the 3D acoustic wave equation on a voxel
//! grid with rigid walls.
//!
//! Each air cell is updated with the seven-point stencil
//!
//! ```text
//! p[n+1] = 2 p[n] - p[n-1] + λ² (Σ p_air_neighbors[n] - K p[n])
//! ```
//!
//! where `K` counts the cell's air neighbors and `λ = c Δt / Δx` is the
//! Courant number. Leaving solid neighbors out of both the sum and `K` is
//! the mirrored-ghost-cell form of a zero normal pressure gradient, so the
//! wall sits half a cell outside the outermost air cell centers and a box
//! of `N` cells has acoustic length exactly `N Δx`.
//!
//! The run starts from a unit pressure at the source cell with zero
//! initial velocity (`p[-1] = p[0]`). Nothing absorbs energy, so the sum
//! of pressure over the air cells is conserved exactly in exact arithmetic.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{box_to_grid, Axis, BoxRoom, GeometryError, OccupancyGrid};
use crate::spectral::{equal_mean_ir, spectrum, Band, SpectralError, Spectrum};

pub use crate::signal::ImpulseResponse;

/// Largest stable Courant number for the 3D seven-point scheme, 1/√3.
pub const MAX_COURANT: f64 = 0.577_350_269_189_625_8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdtdError {
    #[error("Courant number {0} outside (0, 1/√3]")]
    UnstableCourant(f64),
    #[error("{name} must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("config dx = {config} m does not match grid dx = {grid} m")]
    SpacingMismatch { config: f64, grid: f64 },
    #[error("{role} cell {cell:?} is not an air cell")]
    NotAir {
        role: &'static str,
        cell: [usize; 3],
    },
    #[error("no receivers configured")]
    NoReceivers,
    #[error("air region is not 6-connected")]
    Disconnected,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Per-step scheduling. Both modes perform the same arithmetic per cell,
/// so their output is identical; `Serial` exists for single-threaded,
/// reproducible reference runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

fn positive(name: &'static str, value: f64) -> Result<f64, FdtdError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(FdtdError::InvalidParameter { name, value })
    }
}

fn check_courant(courant: f64) -> Result<(), FdtdError> {
    // tolerate the last-ulp rounding of 1/sqrt(3) computed by callers
    if courant.is_finite() && courant > 0.0 && courant <= MAX_COURANT * (1.0 + 1e-12) {
        Ok(())
    } else {
        Err(FdtdError::UnstableCourant(courant))
    }
}

/// Time step `courant * dx / c`.
pub fn derive_timestep(c: f64, dx: f64, courant: f64) -> Result<f64, FdtdError> {
    check_courant(courant)?;
    Ok(courant * positive("dx", dx)? / positive("speed of sound", c)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub c: f64,
    pub dx: f64,
    pub courant: f64,
    pub duration: f64,
    pub source: [usize; 3],
    pub receivers: Vec<[usize; 3]>,
    pub execution: Execution,
}

impl SimConfig {
    pub fn timestep(&self) -> Result<f64, FdtdError> {
        derive_timestep(self.c, self.dx, self.courant)
    }

    pub fn sample_rate(&self) -> Result<f64, FdtdError> {
        Ok(1.0 / self.timestep()?)
    }

    /// Number of recorded samples, `duration * sample_rate` rounded.
    pub fn steps(&self) -> Result<usize, FdtdError> {
        positive("duration", self.duration)?;
        Ok(((self.duration * self.sample_rate()?).round() as usize).max(1))
    }

    pub fn validate(&self, grid: &OccupancyGrid) -> Result<(), FdtdError> {
        self.steps()?;
        if (self.dx - grid.dx()).abs() > 1e-12 * grid.dx() {
            return Err(FdtdError::SpacingMismatch {
                config: self.dx,
                grid: grid.dx(),
            });
        }
        if !grid.is_air(self.source) {
            return Err(FdtdError::NotAir {
                role: "source",
                cell: self.source,
            });
        }
        if self.receivers.is_empty() {
            return Err(FdtdError::NoReceivers);
        }
        if let Some(&cell) = self.receivers.iter().find(|&&r| !grid.is_air(r)) {
            return Err(FdtdError::NotAir {
                role: "receiver",
                cell,
            });
        }
        Ok(())
    }
}

/// Solver state. The grid is copied into arrays padded by one solid cell
/// on every side so the stencil never needs bounds checks.
#[derive(Debug, Clone)]
pub struct FdtdSolver {
    dims: [usize; 3],
    /// Padded dimensions.
    pdims: [usize; 3],
    /// `2 - λ² K` for air, 0 for solid.
    center: Vec<f64>,
    /// `λ²` for air, 0 for solid.
    coupling: Vec<f64>,
    prev: Vec<f64>,
    cur: Vec<f64>,
    air: Vec<bool>,
    steps_taken: usize,
    execution: Execution,
}

impl FdtdSolver {
    /// Solver at `p[0]` with the Kronecker delta at `cfg.source`.
    pub fn new(grid: &OccupancyGrid, cfg: &SimConfig) -> Result<Self, FdtdError> {
        cfg.validate(grid)?;
        let dims = grid.dims();
        let pdims = dims.map(|n| n + 2);
        let len = pdims.iter().product();
        let mut air = vec![false; len];
        for (i, &is_air) in grid.air_mask().iter().enumerate() {
            if is_air {
                air[padded_index(pdims, grid.cell(i))] = true;
            }
        }
        let lambda2 = cfg.courant * cfg.courant;
        let (sx, sy) = (1, pdims[0]);
        let sz = pdims[0] * pdims[1];
        let mut center = vec![0.0; len];
        let mut coupling = vec![0.0; len];
        for i in (0..len).filter(|&i| air[i]) {
            let k = [i - sx, i + sx, i - sy, i + sy, i - sz, i + sz]
                .iter()
                .filter(|&&j| air[j])
                .count();
            center[i] = 2.0 - lambda2 * k as f64;
            coupling[i] = lambda2;
        }
        let mut cur = vec![0.0; len];
        cur[padded_index(pdims, cfg.source)] = 1.0;
        Ok(Self {
            dims,
            pdims,
            center,
            coupling,
            prev: cur.clone(),
            cur,
            air,
            steps_taken: 0,
            execution: cfg.execution,
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// Current pressure at a cell of the original (unpadded) grid.
    pub fn pressure(&self, cell: [usize; 3]) -> f64 {
        assert!(cell.iter().zip(self.dims).all(|(&c, n)| c < n));
        self.cur[padded_index(self.pdims, cell)]
    }

    /// Σ p over air cells.
    pub fn pressure_sum(&self) -> f64 {
        self.cur
            .iter()
            .zip(&self.air)
            .filter(|(_, &a)| a)
            .map(|(p, _)| p)
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.cur.iter().fold(0.0, |m, p| m.max(p.abs()))
    }

    /// Advance one time step.
    pub fn step(&mut self) {
        let [px, py, pz] = self.pdims;
        let plane = px * py;
        let cur = &self.cur;
        let center = &self.center;
        let coupling = &self.coupling;
        // p[n+1] overwrites p[n-1] in place, one z plane per task
        let interior = self.prev.chunks_mut(plane).enumerate().skip(1).take(pz - 2);
        let update = |(k, out): (usize, &mut [f64])| {
            update_plane(k, out, cur, center, coupling, px, py);
        };
        match self.execution {
            Execution::Serial => interior.for_each(update),
            Execution::Parallel => {
                self.prev
                    .par_chunks_mut(plane)
                    .enumerate()
                    .skip(1)
                    .take(pz - 2)
                    .for_each(update);
            }
        }
        std::mem::swap(&mut self.prev, &mut self.cur);
        self.steps_taken += 1;
    }
}

fn padded_index(pdims: [usize; 3], cell: [usize; 3]) -> usize {
    (cell[0] + 1) + pdims[0] * ((cell[1] + 1) + pdims[1] * (cell[2] + 1))
}

#[inline]
fn update_plane(
    k: usize,
    out: &mut [f64],
    cur: &[f64],
    center: &[f64],
    coupling: &[f64],
    px: usize,
    py: usize,
) {
    let plane = px * py;
    let n = px - 2;
    for j in 1..py - 1 {
        let row = k * plane + j * px + 1;
        let c = &cur[row..row + n];
        let xm = &cur[row - 1..row - 1 + n];
        let xp = &cur[row + 1..row + 1 + n];
        let ym = &cur[row - px..row - px + n];
        let yp = &cur[row + px..row + px + n];
        let zm = &cur[row - plane..row - plane + n];
        let zp = &cur[row + plane..row + plane + n];
        let a = &center[row..row + n];
        let b = &coupling[row..row + n];
        let o = &mut out[j * px + 1..j * px + 1 + n];
        for i in 0..n {
            let sum = xm[i] + xp[i] + ym[i] + yp[i] + zm[i] + zp[i];
            o[i] = a[i] * c[i] + b[i] * sum - o[i];
        }
    }
}

/// Run the solver and record every receiver for `cfg.steps()` samples,
/// the first being the initial state.
pub fn simulate(grid: &OccupancyGrid, cfg: &SimConfig) -> Result<Vec<ImpulseResponse>, FdtdError> {
    cfg.validate(grid)?;
    if !grid.is_connected() {
        return Err(FdtdError::Disconnected);
    }
    let steps = cfg.steps()?;
    let fs = cfg.sample_rate()?;
    let mut solver = FdtdSolver::new(grid, cfg)?;
    let mut records: Vec<Vec<f64>> = vec![Vec::with_capacity(steps); cfg.receivers.len()];
    for n in 0..steps {
        if n > 0 {
            solver.step();
        }
        for (rec, &cell) in records.iter_mut().zip(&cfg.receivers) {
            rec.push(solver.pressure(cell));
        }
    }
    Ok(records
        .into_iter()
        .map(|s| ImpulseResponse::new(fs, s).expect("stable scheme yields finite samples"))
        .collect())
}

/// Source and receiver positions as fractions of the air region's extent
/// on each axis (0 = first cell, 1 = last cell). Fractions keep the same
/// relative placement when a wall moves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Placement {
    pub source: [f64; 3],
    pub receivers: Vec<[f64; 3]>,
}

impl Default for Placement {
    /// Opposite corners: every rigid-box mode has a pressure antinode
    /// there, so no low mode is nulled at either end.
    fn default() -> Self {
        Self {
            source: [0.0; 3],
            receivers: vec![[1.0; 3]],
        }
    }
}

impl Placement {
    /// Grid cell for a fractional position: the air cell nearest to it.
    pub fn cell(grid: &OccupancyGrid, fraction: [f64; 3]) -> [usize; 3] {
        let (lo, hi) = grid.air_bounds();
        let mut target = [0usize; 3];
        for k in 0..3 {
            let span = hi[k] - lo[k];
            let f = fraction[k].clamp(0.0, 1.0);
            target[k] = lo[k] + ((f * (span + 1) as f64).floor() as usize).min(span);
        }
        grid.nearest_air_cell(target)
    }

    pub fn resolve(&self, grid: &OccupancyGrid) -> ([usize; 3], Vec<[usize; 3]>) {
        (
            Self::cell(grid, self.source),
            self.receivers
                .iter()
                .map(|&r| Self::cell(grid, r))
                .collect(),
        )
    }
}

/// Everything needed to simulate a room and read its spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub c: f64,
    pub dx: f64,
    pub courant: f64,
    pub duration: f64,
    pub placement: Placement,
    pub band: Band,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            c: crate::modal::DEFAULT_SPEED_OF_SOUND,
            dx: 0.05,
            courant: MAX_COURANT,
            duration: 4.0,
            placement: Placement::default(),
            band: Band::default(),
            execution: Execution::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn sim_config(&self, grid: &OccupancyGrid) -> SimConfig {
        let (source, receivers) = self.placement.resolve(grid);
        SimConfig {
            c: self.c,
            dx: self.dx,
            courant: self.courant,
            duration: self.duration,
            source,
            receivers,
            execution: self.execution,
        }
    }
}

/// Simulate any grid with a fractional placement; the receivers' responses
/// are averaged into one.
pub fn simulate_grid(
    grid: &OccupancyGrid,
    cfg: &ExperimentConfig,
) -> Result<ImpulseResponse, FdtdError> {
    let irs = simulate(grid, &cfg.sim_config(grid))?;
    Ok(equal_mean_ir(&irs)?)
}

pub fn simulate_room(room: &BoxRoom, cfg: &ExperimentConfig) -> Result<ImpulseResponse, FdtdError> {
    simulate_grid(&box_to_grid(room, cfg.dx)?, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpectra {
    pub before: Spectrum,
    pub after: Spectrum,
    pub perturbed: BoxRoom,
}

/// Spectra of a room before and after moving one wall, with source and
/// receivers at the same relative positions.
pub fn run_perturbation_experiment(
    room: &BoxRoom,
    axis: Axis,
    new_length: f64,
    cfg: &ExperimentConfig,
) -> Result<PerturbationSpectra, FdtdError> {
    let perturbed = room.perturb(axis, new_length)?;
    // fail on grid alignment before spending time on the first run
    let before_grid = box_to_grid(room, cfg.dx)?;
    let after_grid = box_to_grid(&perturbed, cfg.dx)?;
    let before = spectrum(&simulate_grid(&before_grid, cfg)?, cfg.band)?;
    let after = if after_grid == before_grid {
        before.clone()
    } else {
        spectrum(&simulate_grid(&after_grid, cfg)?, cfg.band)?
    };
    Ok(PerturbationSpectra {
        before,
        after,
        perturbed,
    })
}
