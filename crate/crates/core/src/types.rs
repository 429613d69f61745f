//! Shared geometry: radar points, clouds, box annotations, grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single radar return: position in meters, normalized RCS and Doppler speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub rcs: f64,
    pub v: f64,
}

impl RadarPoint {
    pub fn new(x: f64, y: f64, z: f64, rcs: f64, v: f64) -> Self {
        Self { x, y, z, rcs, v }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.z.is_finite()
            && self.rcs.is_finite()
            && self.v.is_finite()
    }

    pub(crate) fn as_array(&self) -> [f64; 5] {
        [self.x, self.y, self.z, self.rcs, self.v]
    }

    pub(crate) fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }
}

/// An ordered radar point cloud tagged with a frame identifier. May be empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub frame_id: String,
    pub points: Vec<RadarPoint>,
}

impl PointCloud {
    pub fn new(frame_id: impl Into<String>, points: Vec<RadarPoint>) -> Self {
        Self {
            frame_id: frame_id.into(),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same frame id, new point list.
    pub fn with_points(&self, points: Vec<RadarPoint>) -> Self {
        Self {
            frame_id: self.frame_id.clone(),
            points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.iter().all(RadarPoint::is_finite) {
            Ok(())
        } else {
            Err(Error::NonFinite("point cloud"))
        }
    }
}

/// Oriented 3D box: center, (length, width, height) and yaw about +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxAnnotation {
    pub center: [f64; 3],
    pub size: [f64; 3],
    pub yaw: f64,
}

impl BoxAnnotation {
    pub fn new(center: [f64; 3], size: [f64; 3], yaw: f64) -> Result<Self> {
        if size.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "box size must be strictly positive, got {size:?}"
            )));
        }
        if !(-std::f64::consts::PI..=std::f64::consts::PI).contains(&yaw) {
            return Err(Error::InvalidArgument(format!(
                "box yaw {yaw} outside [-pi, pi]"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("box center"));
        }
        Ok(Self { center, size, yaw })
    }

    /// Offset of `(x, y)` expressed in the box's yaw-rotated planar frame.
    fn local_xy(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let (s, c) = self.yaw.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Membership ignoring the vertical extent.
    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        let (lx, ly) = self.local_xy(x, y);
        lx.abs() <= 0.5 * self.size[0] && ly.abs() <= 0.5 * self.size[1]
    }

    pub fn contains(&self, pt: &RadarPoint) -> bool {
        self.contains_xy(pt.x, pt.y) && (pt.z - self.center[2]).abs() <= 0.5 * self.size[2]
    }
}

/// True iff `pt` lies inside `b` (closed faces).
pub fn point_in_box(pt: &RadarPoint, b: &BoxAnnotation) -> bool {
    b.contains(pt)
}

/// A radar cloud with its annotations and the seed it was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub cloud: PointCloud,
    pub boxes: Vec<BoxAnnotation>,
    pub seed: u64,
}

/// Axis-aligned voxel grid layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub z_range: [f64; 2],
    pub cells: [usize; 3],
}

/// Planar radar range, meters.
pub const DEFAULT_PLANAR_RANGE: [f64; 2] = [-51.2, 51.2];
/// BEV resolution.
pub const DEFAULT_BEV_CELLS: usize = 128;
/// Vertical extent; not given by the method, chosen to cover road-level returns.
pub const DEFAULT_Z_RANGE: [f64; 2] = [-5.0, 3.0];
pub const DEFAULT_Z_CELLS: usize = 8;

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x_range: DEFAULT_PLANAR_RANGE,
            y_range: DEFAULT_PLANAR_RANGE,
            z_range: DEFAULT_Z_RANGE,
            cells: [DEFAULT_BEV_CELLS, DEFAULT_BEV_CELLS, DEFAULT_Z_CELLS],
        }
    }
}

impl GridSpec {
    pub fn new(
        x_range: [f64; 2],
        y_range: [f64; 2],
        z_range: [f64; 2],
        cells: [usize; 3],
    ) -> Result<Self> {
        let spec = Self {
            x_range,
            y_range,
            z_range,
            cells,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (axis, r) in self.ranges().iter().enumerate() {
            if !(r[0].is_finite() && r[1].is_finite() && r[1] > r[0]) {
                return Err(Error::InvalidArgument(format!(
                    "grid axis {axis}: range {r:?} must satisfy min < max"
                )));
            }
            if self.cells[axis] == 0 {
                return Err(Error::InvalidArgument(format!(
                    "grid axis {axis}: cell count must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn ranges(&self) -> [[f64; 2]; 3] {
        [self.x_range, self.y_range, self.z_range]
    }

    pub fn nx(&self) -> usize {
        self.cells[0]
    }

    pub fn ny(&self) -> usize {
        self.cells[1]
    }

    pub fn nz(&self) -> usize {
        self.cells[2]
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_size(&self, axis: usize) -> f64 {
        let r = self.ranges()[axis];
        (r[1] - r[0]) / self.cells[axis] as f64
    }

    fn axis_index(&self, axis: usize, coord: f64) -> Option<usize> {
        let [lo, hi] = self.ranges()[axis];
        if !(coord >= lo && coord <= hi) {
            return None;
        }
        let n = self.cells[axis];
        let i = ((coord - lo) / self.cell_size(axis)).floor() as usize;
        Some(i.min(n - 1))
    }

    /// Floor binning; `max` lands in the last cell, anything outside is `None`.
    pub fn voxel_index(&self, position: [f64; 3]) -> Option<[usize; 3]> {
        Some([
            self.axis_index(0, position[0])?,
            self.axis_index(1, position[1])?,
            self.axis_index(2, position[2])?,
        ])
    }

    /// Flat offset in x-major order (x slowest, z fastest).
    pub fn flat(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.cells[1] + idx[1]) * self.cells[2] + idx[2]
    }

    pub fn unflat(&self, flat: usize) -> [usize; 3] {
        let nz = self.cells[2];
        let ny = self.cells[1];
        [flat / (ny * nz), (flat / nz) % ny, flat % nz]
    }

    pub fn cell_center(&self, idx: [usize; 3]) -> [f64; 3] {
        let r = self.ranges();
        std::array::from_fn(|a| r[a][0] + (idx[a] as f64 + 0.5) * self.cell_size(a))
    }
}

/// Voxelized radar field with accumulated RCS, velocity and point count.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub spec: GridSpec,
    pub rcs: Vec<f64>,
    pub vel: Vec<f64>,
    pub count: Vec<u32>,
}

impl VoxelGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        let n = spec.len();
        Self {
            spec,
            rcs: vec![0.0; n],
            vel: vec![0.0; n],
            count: vec![0; n],
        }
    }

    pub fn from_fields(spec: GridSpec, rcs: Vec<f64>, vel: Vec<f64>, count: Vec<u32>) -> Result<Self> {
        let n = spec.len();
        if rcs.len() != n || vel.len() != n || count.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "grid fields ({}, {}, {}) do not match {} cells",
                rcs.len(),
                vel.len(),
                count.len(),
                n
            )));
        }
        Ok(Self {
            spec,
            rcs,
            vel,
            count,
        })
    }

    pub fn total_rcs(&self) -> f64 {
        self.rcs.iter().sum()
    }

    pub fn total_vel(&self) -> f64 {
        self.vel.iter().sum()
    }
}
