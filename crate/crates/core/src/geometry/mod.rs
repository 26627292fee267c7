//! Box rooms, triangle meshes and voxelized cavities.
//!
//! A [`BoxRoom`] is the idealized rectangular chamber used by the modal
//! model. Arbitrary cavities come in as a [`TriangleMesh`] and are turned
//! into an [`OccupancyGrid`] of air/solid cells for the wave solver.

mod mesh;
mod voxel;

pub use mesh::{parse_mesh, TriangleMesh};
pub use voxel::{box_to_grid, voxelize, OccupancyGrid};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid dimension {axis} = {value} m (must be positive and finite)")]
    InvalidDimension { axis: Axis, value: f64 },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh is not watertight: edge ({0}, {1}) is shared by {2} faces")]
    NotWatertight(usize, usize, usize),
    #[error(
        "grid spacing {dx} m must be positive and no larger than the smallest extent {extent} m"
    )]
    InvalidSpacing { dx: f64, extent: f64 },
    #[error("{axis} dimension {length} m is not an integer multiple of dx = {dx} m")]
    NotGridAligned { axis: Axis, length: f64, dx: f64 },
    #[error("occupancy grid has no air cells")]
    NoAir,
    #[error("occupancy has {got} cells, expected {expected}")]
    ShapeMismatch { got: usize, expected: usize },
}

/// One of the three box axes: x (length), y (width), z (height).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" | "length" => Ok(Axis::X),
            "y" | "width" => Ok(Axis::Y),
            "z" | "height" => Ok(Axis::Z),
            other => Err(format!("unknown axis '{other}' (expected x, y or z)")),
        }
    }
}

/// Idealized rectangular chamber. Dimensions are stored in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRoom {
    label: String,
    dims: [f64; 3],
}

impl BoxRoom {
    pub fn new(label: impl Into<String>, lx: f64, ly: f64, lz: f64) -> Result<Self, GeometryError> {
        let dims = [lx, ly, lz];
        for axis in Axis::ALL {
            check_length(axis, dims[axis.index()])?;
        }
        Ok(Self {
            label: label.into(),
            dims,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dims(&self) -> [f64; 3] {
        self.dims
    }

    pub fn length(&self, axis: Axis) -> f64 {
        self.dims[axis.index()]
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }

    /// Copy of the room with one wall moved so that `axis` measures
    /// `new_length`. The original is left untouched.
    pub fn perturb(&self, axis: Axis, new_length: f64) -> Result<Self, GeometryError> {
        check_length(axis, new_length)?;
        let mut out = self.clone();
        out.dims[axis.index()] = new_length;
        Ok(out)
    }
}

fn check_length(axis: Axis, value: f64) -> Result<(), GeometryError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidDimension { axis, value })
    }
}

pub fn make_box_room(label: &str, lx: f64, ly: f64, lz: f64) -> Result<BoxRoom, GeometryError> {
    BoxRoom::new(label, lx, ly, lz)
}

pub fn perturb_box(room: &BoxRoom, axis: Axis, new_length: f64) -> Result<BoxRoom, GeometryError> {
    room.perturb(axis, new_length)
}
