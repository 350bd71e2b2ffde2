//! Sparse voxel occupancy grid.
//!
//! Space is partitioned into axis-aligned cubes of side `resolution`; voxel
//! `(i, j, k)` covers the half-open region `[i*res, (i+1)*res) x ... `, so a
//! point belongs to exactly one voxel.  The map stores the set of occupied
//! voxel indices and answers point-membership queries; it is immutable
//! during a planning cycle by construction (built once from a scene, then
//! only queried).
//!
//! Boxes are rasterized conservatively: every voxel whose cube intersects
//! the box interior is marked occupied.  Box faces that lie exactly on a
//! voxel boundary (to within a small relative snap tolerance) do not bleed
//! into the neighboring voxel, so scenes aligned to the grid rasterize
//! without dilation.

use std::collections::HashSet;

use nalgebra::Vector3;

use crate::{PlannerError, Result};

/// Relative tolerance for snapping box faces onto voxel boundaries.
const BOUNDARY_SNAP: f64 = 1e-9;

/// A sparse set of occupied voxels at a fixed resolution.
#[derive(Debug, Clone)]
pub struct VoxelMap {
    resolution: f64,
    occupied: HashSet<(i64, i64, i64)>,
}

impl VoxelMap {
    /// An empty map with the given voxel side length \[m\].
    pub fn new(resolution: f64) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(PlannerError::OutOfRange {
                context: "VoxelMap::new resolution",
                value: resolution,
                range: "(0, inf)",
            });
        }
        Ok(VoxelMap {
            resolution,
            occupied: HashSet::new(),
        })
    }

    /// Voxel side length \[m\].
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Number of occupied voxels.
    pub fn occupied_count(&self) -> usize {
        self.occupied.len()
    }

    /// True when no voxel is occupied; collision checks can be skipped.
    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    /// The index of the voxel containing `p`.
    pub fn voxel_index(&self, p: &Vector3<f64>) -> (i64, i64, i64) {
        (
            (p.x / self.resolution).floor() as i64,
            (p.y / self.resolution).floor() as i64,
            (p.z / self.resolution).floor() as i64,
        )
    }

    /// Whether the point lies in an occupied voxel.
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        self.occupied.contains(&self.voxel_index(p))
    }

    /// Whether the point with the given coordinates lies in an occupied voxel.
    pub fn contains_xyz(&self, x: f64, y: f64, z: f64) -> bool {
        let idx = (
            (x / self.resolution).floor() as i64,
            (y / self.resolution).floor() as i64,
            (z / self.resolution).floor() as i64,
        );
        self.occupied.contains(&idx)
    }

    /// Marks every voxel intersected by the axis-aligned box as occupied.
    ///
    /// The box must have strictly positive volume and finite corners.
    pub fn insert_box(&mut self, min: Vector3<f64>, max: Vector3<f64>) -> Result<()> {
        for axis in 0..3 {
            if !(min[axis].is_finite() && max[axis].is_finite()) {
                return Err(PlannerError::InvalidScene(format!(
                    "box corner has non-finite coordinate on axis {axis}"
                )));
            }
            if max[axis] <= min[axis] {
                return Err(PlannerError::InvalidScene(format!(
                    "box has non-positive extent on axis {axis}: [{}, {}]",
                    min[axis], max[axis]
                )));
            }
        }
        let (x0, x1) = self.axis_span(min.x, max.x);
        let (y0, y1) = self.axis_span(min.y, max.y);
        let (z0, z1) = self.axis_span(min.z, max.z);
        for i in x0..=x1 {
            for j in y0..=y1 {
                for k in z0..=z1 {
                    self.occupied.insert((i, j, k));
                }
            }
        }
        Ok(())
    }

    /// Inclusive voxel index range covered by the interval `[lo, hi]`.
    fn axis_span(&self, lo: f64, hi: f64) -> (i64, i64) {
        let first = snapped_floor(lo / self.resolution);
        // The voxel starting exactly at `hi` is not intersected.
        let last = snapped_ceil(hi / self.resolution) - 1;
        (first, last.max(first))
    }
}

/// Floor with boundary snapping: values within `BOUNDARY_SNAP` of an integer
/// are treated as that integer.
fn snapped_floor(s: f64) -> i64 {
    let r = s.round();
    if (s - r).abs() <= BOUNDARY_SNAP * (1.0 + s.abs()) {
        r as i64
    } else {
        s.floor() as i64
    }
}

/// Ceil with the same boundary snapping as [`snapped_floor`].
fn snapped_ceil(s: f64) -> i64 {
    let r = s.round();
    if (s - r).abs() <= BOUNDARY_SNAP * (1.0 + s.abs()) {
        r as i64
    } else {
        s.ceil() as i64
    }
}
