//! Radar voxelization and 3D Gaussian expansion.
//!
//! Each radar point gets a kernel side length `λ ∈ {1, 3, 5}` and a spread
//! `σ` (in voxel units) from its RCS and velocity. Its RCS and velocity are
//! then spread over the `λ³` voxels around its cell with Gaussian weights
//! normalized to sum to one, and the expanded grid is added back onto the raw
//! grid.
//!
//! Dense targets return many points whose kernels overlap and reinforce each
//! other, while an isolated false positive is smeared thin, which is what
//! makes the expansion act as a noise suppressor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{GridSpec, PointCloud, VoxelGrid};

/// Admissible kernel side lengths.
pub const KERNEL_SIDES: [usize; 3] = [1, 3, 5];
/// Lower bound added to the learned σ.
pub const SIGMA_FLOOR: f64 = 0.1;
pub const HIDDEN_WIDTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    lambda: usize,
    sigma: f64,
}

impl KernelParams {
    pub fn new(lambda: usize, sigma: f64) -> Result<Self> {
        if !KERNEL_SIDES.contains(&lambda) {
            return Err(Error::InvalidArgument(format!(
                "kernel side must be one of {KERNEL_SIDES:?}, got {lambda}"
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kernel sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self { lambda, sigma })
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        (self.lambda - 1) / 2
    }
}

/// Which offsets enter the Gaussian exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ExponentMode {
    /// `dx² + dy²`; every z layer of the cube gets the same planar profile.
    #[default]
    PlanarXY,
    /// `dx² + dy² + dz²`.
    Isotropic3D,
}

/// Normalized `λ×λ×λ` weight cube, x-major like [`VoxelGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    side: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at integer offset `(dx, dy, dz)` from the center.
    pub fn at(&self, d: [isize; 3]) -> f64 {
        let r = (self.side / 2) as isize;
        let s = self.side;
        let i = |k: isize| (k + r) as usize;
        self.weights[(i(d[0]) * s + i(d[1])) * s + i(d[2])]
    }
}

pub fn build_kernel(params: KernelParams, mode: ExponentMode) -> Kernel {
    let side = params.lambda;
    let r = params.radius() as isize;
    let two_var = 2.0 * params.sigma * params.sigma;
    let mut weights = Vec::with_capacity(side * side * side);
    for dx in -r..=r {
        for dy in -r..=r {
            for dz in -r..=r {
                let mut d2 = (dx * dx + dy * dy) as f64;
                if mode == ExponentMode::Isotropic3D {
                    d2 += (dz * dz) as f64;
                }
                weights.push((-d2 / two_var).exp());
            }
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Kernel { side, weights }
}

/// Two-layer encoder `(rcs, v) → 8 → (3 size logits, raw σ)` with a rectifier
/// on the hidden layer.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectorWeights {
    pub hidden_weight: [[f64; 2]; HIDDEN_WIDTH],
    pub hidden_bias: [f64; HIDDEN_WIDTH],
    pub out_weight: [[f64; HIDDEN_WIDTH]; 4],
    pub out_bias: [f64; 4],
}

impl ProjectorWeights {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format("projector weights", e.to_string()))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Raw output layer `[logit_1, logit_3, logit_5, raw_sigma]`.
    pub fn forward(&self, rcs: f64, v: f64) -> [f64; 4] {
        let hidden: [f64; HIDDEN_WIDTH] = std::array::from_fn(|j| {
            let w = self.hidden_weight[j];
            (w[0] * rcs + w[1] * v + self.hidden_bias[j]).max(0.0)
        });
        std::array::from_fn(|o| {
            self.out_weight[o]
                .iter()
                .zip(&hidden)
                .map(|(w, h)| w * h)
                .sum::<f64>()
                + self.out_bias[o]
        })
    }
}

fn softplus(x: f64) -> f64 {
    // log(1 + e^x) without overflow
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Kernel parameters from the learned encoder. Ties between size logits
/// resolve to the smallest kernel.
pub fn project_params(rcs: f64, v: f64, weights: &ProjectorWeights) -> Result<KernelParams> {
    if !(rcs.is_finite() && v.is_finite()) {
        return Err(Error::NonFinite("projector input"));
    }
    let out = weights.forward(rcs, v);
    let mut best = 0;
    for k in 1..3 {
        if out[k] > out[best] {
            best = k;
        }
    }
    KernelParams::new(KERNEL_SIDES[best], softplus(out[3]) + SIGMA_FLOOR)
}

/// Linear-interpolated percentile of an unsorted sample, `q ∈ [0, 100]`.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

/// Source of per-point kernel parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Projector {
    /// Rank-based rule: weak returns get wide kernels, strong ones stay sharp.
    /// `λ = 5` below the 25th RCS percentile, `3` below the 75th, else `1`;
    /// `σ = λ / 3`.
    Heuristic { p25: f64, p75: f64 },
    Learned(ProjectorWeights),
}

impl Projector {
    /// Heuristic projector calibrated on the cloud's RCS distribution.
    pub fn heuristic_for(cloud: &PointCloud) -> Self {
        let rcs: Vec<f64> = cloud.points.iter().map(|p| p.rcs).collect();
        Projector::Heuristic {
            p25: percentile(&rcs, 25.0).unwrap_or(0.0),
            p75: percentile(&rcs, 75.0).unwrap_or(0.0),
        }
    }

    pub fn params(&self, rcs: f64, v: f64) -> Result<KernelParams> {
        match self {
            Projector::Heuristic { p25, p75 } => {
                if !(rcs.is_finite() && v.is_finite()) {
                    return Err(Error::NonFinite("projector input"));
                }
                let lambda = if rcs < *p25 {
                    5
                } else if rcs < *p75 {
                    3
                } else {
                    1
                };
                KernelParams::new(lambda, lambda as f64 / 3.0)
            }
            Projector::Learned(w) => project_params(rcs, v, w),
        }
    }

    pub fn params_for_cloud(&self, cloud: &PointCloud) -> Result<Vec<KernelParams>> {
        cloud.points.iter().map(|p| self.params(p.rcs, p.v)).collect()
    }
}

/// Binned radar grid plus the number of points that fell outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Voxelized {
    pub grid: VoxelGrid,
    pub skipped: usize,
}

/// Accumulates RCS, velocity and count per cell.
pub fn voxelize(cloud: &PointCloud, spec: &GridSpec) -> Voxelized {
    let mut grid = VoxelGrid::zeros(*spec);
    let mut skipped = 0;
    for p in &cloud.points {
        match spec.voxel_index(p.position()) {
            Some(idx) => {
                let f = spec.flat(idx);
                grid.rcs[f] += p.rcs;
                grid.vel[f] += p.v;
                grid.count[f] += 1;
            }
            None => skipped += 1,
        }
    }
    Voxelized { grid, skipped }
}

/// Deposits each in-range point's RCS and velocity over its kernel footprint.
/// Footprint cells outside the grid are dropped without renormalizing. The
/// count field records the points whose center cell is each voxel.
pub fn expand(
    cloud: &PointCloud,
    spec: &GridSpec,
    params_per_point: &[KernelParams],
    mode: ExponentMode,
) -> Result<VoxelGrid> {
    if params_per_point.len() != cloud.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} kernel params for {} points",
            params_per_point.len(),
            cloud.len()
        )));
    }
    let mut grid = VoxelGrid::zeros(*spec);
    let n = spec.cells.map(|c| c as isize);
    for (p, params) in cloud.points.iter().zip(params_per_point) {
        let Some(center) = spec.voxel_index(p.position()) else {
            continue;
        };
        grid.count[spec.flat(center)] += 1;
        let kernel = build_kernel(*params, mode);
        let r = params.radius() as isize;
        let mut w = kernel.weights.iter();
        for dx in -r..=r {
            for dy in -r..=r {
                for dz in -r..=r {
                    let weight = *w.next().expect("kernel has side³ weights");
                    let cell = [
                        center[0] as isize + dx,
                        center[1] as isize + dy,
                        center[2] as isize + dz,
                    ];
                    if (0..3).any(|a| cell[a] < 0 || cell[a] >= n[a]) {
                        continue;
                    }
                    let f = spec.flat(cell.map(|c| c as usize));
                    grid.rcs[f] += weight * p.rcs;
                    grid.vel[f] += weight * p.v;
                }
            }
        }
    }
    Ok(grid)
}

/// Residual merge: field-wise sum of RCS and velocity, counts from `original`.
pub fn merge_residual(original: &VoxelGrid, expanded: &VoxelGrid) -> Result<VoxelGrid> {
    if original.spec != expanded.spec {
        return Err(Error::DimensionMismatch("merging grids with different specs".into()));
    }
    let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
    Ok(VoxelGrid {
        spec: original.spec,
        rcs: add(&original.rcs, &expanded.rcs),
        vel: add(&original.vel, &expanded.vel),
        count: original.count.clone(),
    })
}

/// Full expansion pipeline: voxelize, expand with `projector`, merge.
pub fn gaussian_expansion(
    cloud: &PointCloud,
    spec: &GridSpec,
    projector: &Projector,
    mode: ExponentMode,
) -> Result<VoxelGrid> {
    let raw = voxelize(cloud, spec).grid;
    let params = projector.params_for_cloud(cloud)?;
    let expanded = expand(cloud, spec, &params, mode)?;
    merge_residual(&raw, &expanded)
}

/// Dense `nx × ny` top-down map, row-major over x then y.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<f64>,
}

impl Heatmap {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            data: vec![0.0; nx * ny],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nx = rows.len();
        let ny = rows.first().map_or(0, Vec::len);
        if nx == 0 || ny == 0 || rows.iter().any(|r| r.len() != ny) {
            return Err(Error::DimensionMismatch("ragged or empty heatmap rows".into()));
        }
        Ok(Self {
            nx,
            ny,
            data: rows.concat(),
        })
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.data[ix * self.ny + iy]
    }

    /// First maximum in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.data.iter().enumerate() {
            if *v > self.data[best] {
                best = i;
            }
        }
        (best / self.ny, best % self.ny)
    }
}

/// Sums `|rcs|` over the vertical axis.
pub fn bev_project(grid: &VoxelGrid) -> Heatmap {
    let [nx, ny, nz] = grid.spec.cells;
    let mut map = Heatmap::zeros(nx, ny);
    for (cell, column) in map.data.iter_mut().zip(grid.rcs.chunks_exact(nz)) {
        *cell = column.iter().map(|v| v.abs()).sum();
    }
    map
}
