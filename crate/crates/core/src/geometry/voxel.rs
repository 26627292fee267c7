use std::collections::VecDeque;

use super::{Axis, BoxRoom, GeometryError, TriangleMesh};

/// Relative tolerance when checking that a box dimension is a whole number
/// of grid cells.
const ALIGN_TOL: f64 = 1e-9;

/// Voxelized cavity. Cell `(i, j, k)` spans
/// `origin + [i, i+1) * dx` (and likewise for `j`, `k`); `true` marks air.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    dims: [usize; 3],
    dx: f64,
    origin: [f64; 3],
    air: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(
        dims: [usize; 3],
        dx: f64,
        origin: [f64; 3],
        air: Vec<bool>,
    ) -> Result<Self, GeometryError> {
        let expected = dims.iter().product();
        if air.len() != expected {
            return Err(GeometryError::ShapeMismatch {
                got: air.len(),
                expected,
            });
        }
        if !(dx.is_finite() && dx > 0.0) {
            return Err(GeometryError::InvalidSpacing {
                dx,
                extent: f64::NAN,
            });
        }
        if !air.iter().any(|&a| a) {
            return Err(GeometryError::NoAir);
        }
        Ok(Self {
            dims,
            dx,
            origin,
            air,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    /// Physical extent of the whole grid (cell count × dx per axis).
    pub fn extent(&self) -> [f64; 3] {
        self.dims.map(|n| n as f64 * self.dx)
    }

    pub fn len(&self) -> usize {
        self.air.len()
    }

    pub fn is_empty(&self) -> bool {
        self.air.is_empty()
    }

    pub fn index(&self, cell: [usize; 3]) -> usize {
        cell[0] + self.dims[0] * (cell[1] + self.dims[1] * cell[2])
    }

    pub fn cell(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn contains(&self, cell: [usize; 3]) -> bool {
        cell.iter().zip(self.dims).all(|(&c, n)| c < n)
    }

    pub fn is_air(&self, cell: [usize; 3]) -> bool {
        self.contains(cell) && self.air[self.index(cell)]
    }

    pub fn air_mask(&self) -> &[bool] {
        &self.air
    }

    pub fn air_count(&self) -> usize {
        self.air.iter().filter(|&&a| a).count()
    }

    pub fn air_volume(&self) -> f64 {
        self.air_count() as f64 * self.dx.powi(3)
    }

    pub fn cell_center(&self, cell: [usize; 3]) -> [f64; 3] {
        let mut p = [0.0; 3];
        for k in 0..3 {
            p[k] = self.origin[k] + (cell[k] as f64 + 0.5) * self.dx;
        }
        p
    }

    /// Inclusive index bounds of the air cells.
    pub fn air_bounds(&self) -> ([usize; 3], [usize; 3]) {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0; 3];
        for (i, _) in self.air.iter().enumerate().filter(|(_, &a)| a) {
            let c = self.cell(i);
            for k in 0..3 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        (lo, hi)
    }

    /// Per-axis air cell counts when the air region is a solid box.
    pub fn air_box_shape(&self) -> Option<[usize; 3]> {
        let (lo, hi) = self.air_bounds();
        let shape = [0, 1, 2].map(|k| hi[k] - lo[k] + 1);
        (shape.iter().product::<usize>() == self.air_count()).then_some(shape)
    }

    fn neighbors(&self, cell: [usize; 3]) -> impl Iterator<Item = [usize; 3]> + '_ {
        (0..6).filter_map(move |d| {
            let axis = d / 2;
            let mut n = cell;
            if d % 2 == 0 {
                n[axis] = n[axis].checked_sub(1)?;
            } else {
                n[axis] += 1;
            }
            self.contains(n).then_some(n)
        })
    }

    /// Whether all air cells form one 6-connected component.
    pub fn is_connected(&self) -> bool {
        let Some(start) = self.air.iter().position(|&a| a) else {
            return false;
        };
        let mut seen = vec![false; self.air.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut reached = 1;
        while let Some(i) = queue.pop_front() {
            for n in self.neighbors(self.cell(i)) {
                let j = self.index(n);
                if self.air[j] && !seen[j] {
                    seen[j] = true;
                    reached += 1;
                    queue.push_back(j);
                }
            }
        }
        reached == self.air_count()
    }

    /// Air cell closest (by index distance) to `target`; ties go to the
    /// lowest linear index.
    pub fn nearest_air_cell(&self, target: [usize; 3]) -> [usize; 3] {
        let dist =
            |c: [usize; 3]| -> usize { (0..3).map(|k| c[k].abs_diff(target[k]).pow(2)).sum() };
        let best = self
            .air
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(i, _)| (dist(self.cell(i)), i))
            .min()
            .map(|(_, i)| i)
            .expect("grid has at least one air cell");
        self.cell(best)
    }
}

/// Grid whose air region is exactly the box, padded with one solid layer.
/// Each box dimension must be a whole number of cells.
pub fn box_to_grid(room: &BoxRoom, dx: f64) -> Result<OccupancyGrid, GeometryError> {
    let smallest = room.dims().into_iter().fold(f64::INFINITY, f64::min);
    if !(dx.is_finite() && dx > 0.0) || dx > smallest {
        return Err(GeometryError::InvalidSpacing {
            dx,
            extent: smallest,
        });
    }
    let mut cells = [0usize; 3];
    for axis in Axis::ALL {
        let length = room.length(axis);
        let n = (length / dx).round();
        if n < 1.0 || (n * dx - length).abs() > ALIGN_TOL * length {
            return Err(GeometryError::NotGridAligned { axis, length, dx });
        }
        cells[axis.index()] = n as usize;
    }
    let dims = cells.map(|n| n + 2);
    let mut air = vec![false; dims.iter().product()];
    for k in 1..=cells[2] {
        for j in 1..=cells[1] {
            let row = dims[0] * (j + dims[1] * k);
            air[row + 1..=row + cells[0]].fill(true);
        }
    }
    OccupancyGrid::new(dims, dx, [-dx; 3], air)
}

/// Classify cell centers by the parity of crossings along a +z ray.
/// The grid covers the mesh bounds plus one solid layer on every side.
pub fn voxelize(mesh: &TriangleMesh, dx: f64) -> Result<OccupancyGrid, GeometryError> {
    mesh.check_watertight()?;
    let (lo, hi) = mesh.bounds().ok_or(GeometryError::NoAir)?;
    let extent = [0, 1, 2].map(|k| hi[k] - lo[k]);
    let smallest = extent.iter().copied().fold(f64::INFINITY, f64::min);
    if !(dx.is_finite() && dx > 0.0) || dx > smallest {
        return Err(GeometryError::InvalidSpacing {
            dx,
            extent: smallest,
        });
    }
    let cells = extent.map(|e| ((e / dx - ALIGN_TOL).ceil() as usize).max(1));
    let dims = cells.map(|n| n + 2);
    let origin = [0, 1, 2].map(|k| lo[k] - dx);
    let center = |k: usize, i: usize| origin[k] + (i as f64 + 0.5) * dx;

    // z crossings per (i, j) column of the padded grid
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); dims[0] * dims[1]];
    for f in 0..mesh.faces().len() {
        let tri = mesh.triangle(f);
        let tlo = [0, 1].map(|k| tri.iter().map(|v| v[k]).fold(f64::INFINITY, f64::min));
        let thi = [0, 1].map(|k| tri.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max));
        // columns whose center lies in the triangle's projected bounds
        let range = |k: usize| {
            let a = ((tlo[k] - origin[k]) / dx - 0.5).floor().max(0.0) as usize;
            let b = (((thi[k] - origin[k]) / dx - 0.5).ceil().max(0.0) as usize).min(dims[k] - 1);
            a..=b
        };
        for j in range(1) {
            for i in range(0) {
                if let Some(z) = ray_hit(&tri, [center(0, i), center(1, j)]) {
                    columns[i + dims[0] * j].push(z);
                }
            }
        }
    }

    let mut air = vec![false; dims.iter().product()];
    for (col, hits) in columns.iter_mut().enumerate() {
        if hits.is_empty() {
            continue;
        }
        hits.sort_by(f64::total_cmp);
        let mut below = 0;
        for k in 0..dims[2] {
            let z = center(2, k);
            while below < hits.len() && hits[below] < z {
                below += 1;
            }
            air[col + dims[0] * dims[1] * k] = below % 2 == 1;
        }
    }
    OccupancyGrid::new(dims, dx, origin, air)
}

/// Height at which the vertical line through `p` pierces the triangle.
///
/// Points exactly on a projected edge or vertex are resolved by treating
/// `p` as displaced by `(eps, eps^2)`; edge functions are evaluated with a
/// canonical vertex order so the two faces sharing an edge agree exactly.
fn ray_hit(tri: &[[f64; 3]; 3], p: [f64; 2]) -> Option<f64> {
    let mut w = [0.0; 3];
    let mut sign = [0i8; 3];
    for e in 0..3 {
        let (u, v) = (tri[(e + 1) % 3], tri[(e + 2) % 3]);
        let flip = (u[0], u[1]) > (v[0], v[1]);
        let (a, b) = if flip { (v, u) } else { (u, v) };
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let val = ex * (p[1] - a[1]) - ey * (p[0] - a[0]);
        let s = if val != 0.0 {
            val.signum()
        } else if ey != 0.0 {
            -ey.signum()
        } else if ex != 0.0 {
            ex.signum()
        } else {
            return None;
        };
        let dir = if flip { -1.0 } else { 1.0 };
        w[e] = val * dir;
        sign[e] = (s * dir) as i8;
    }
    if sign[0] != sign[1] || sign[1] != sign[2] {
        return None;
    }
    let area: f64 = w.iter().sum();
    if area == 0.0 {
        return None;
    }
    Some((w[0] * tri[0][2] + w[1] * tri[1][2] + w[2] * tri[2][2]) / area)
}
