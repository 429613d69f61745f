//! Synthetic radar scenes: dense annotated target clusters in sparse
//! uniform clutter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::types::{BoxAnnotation, GridSpec, PointCloud, RadarPoint, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub cluster_count: usize,
    pub points_per_cluster: usize,
    /// Disc radius, meters.
    pub cluster_radius: f64,
    pub noise_points: usize,
    pub cluster_rcs: [f64; 2],
    pub noise_rcs: [f64; 2],
    pub velocity: [f64; 2],
    pub box_height: f64,
    /// Fixed cluster centers; clusters beyond this list get random centers.
    pub cluster_centers: Vec<[f64; 3]>,
}

impl Default for SceneConfig {
    /// One 30-point target of radius 2 m at (10, 5, 0) among 50 clutter points.
    fn default() -> Self {
        Self {
            cluster_count: 1,
            points_per_cluster: 30,
            cluster_radius: 2.0,
            noise_points: 50,
            cluster_rcs: [5.0, 10.0],
            noise_rcs: [0.5, 2.0],
            velocity: [-1.0, 1.0],
            box_height: 2.0,
            cluster_centers: vec![[10.0, 5.0, 0.0]],
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must satisfy min <= max, got {r:?}")))
    }
}

impl SceneConfig {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        grid.validate()?;
        if !(self.cluster_radius.is_finite() && self.cluster_radius > 0.0) {
            return Err(Error::Config("cluster_radius must be positive".into()));
        }
        if !(self.box_height.is_finite() && self.box_height > 0.0) {
            return Err(Error::Config("box_height must be positive".into()));
        }
        check_range("cluster_rcs", self.cluster_rcs)?;
        check_range("noise_rcs", self.noise_rcs)?;
        check_range("velocity", self.velocity)?;
        if self.cluster_centers.len() > self.cluster_count {
            return Err(Error::Config(format!(
                "{} cluster centers given for {} clusters",
                self.cluster_centers.len(),
                self.cluster_count
            )));
        }
        for c in &self.cluster_centers {
            if grid.voxel_index(*c).is_none() {
                return Err(Error::Config(format!("cluster center {c:?} outside the grid")));
            }
        }
        let margin = self.cluster_radius;
        if self.cluster_count > self.cluster_centers.len()
            && (grid.x_range[1] - grid.x_range[0] <= 2.0 * margin
                || grid.y_range[1] - grid.y_range[0] <= 2.0 * margin)
        {
            return Err(Error::Config("grid too small for random cluster centers".into()));
        }
        Ok(())
    }
}

/// Generates a scene; fully determined by `(cfg, grid, rng state)`.
///
/// Each cluster draws its points uniformly over a horizontal disc at the
/// center height and is annotated with an axis-aligned box of planar extent
/// `2 × radius` and height `box_height`. Clutter is uniform over the grid.
pub fn gen_scene(cfg: &SceneConfig, grid: &GridSpec, rng: &mut Rng) -> Result<Scene> {
    cfg.validate(grid)?;
    let seed = rng.seed();
    let r = cfg.cluster_radius;
    let mid_z = 0.5 * (grid.z_range[0] + grid.z_range[1]);
    let mut points = Vec::with_capacity(cfg.cluster_count * cfg.points_per_cluster + cfg.noise_points);
    let mut boxes = Vec::with_capacity(cfg.cluster_count);
    for i in 0..cfg.cluster_count {
        let center = match cfg.cluster_centers.get(i) {
            Some(c) => *c,
            None => [
                rng.uniform(grid.x_range[0] + r, grid.x_range[1] - r),
                rng.uniform(grid.y_range[0] + r, grid.y_range[1] - r),
                if grid.z_range[0] <= 0.0 && 0.0 <= grid.z_range[1] { 0.0 } else { mid_z },
            ],
        };
        for _ in 0..cfg.points_per_cluster {
            let rho = r * rng.unit().sqrt();
            let theta = 2.0 * std::f64::consts::PI * rng.unit();
            points.push(RadarPoint::new(
                center[0] + rho * theta.cos(),
                center[1] + rho * theta.sin(),
                center[2],
                rng.uniform(cfg.cluster_rcs[0], cfg.cluster_rcs[1]),
                rng.uniform(cfg.velocity[0], cfg.velocity[1]),
            ));
        }
        boxes.push(BoxAnnotation::new(center, [2.0 * r, 2.0 * r, cfg.box_height], 0.0)?);
    }
    for _ in 0..cfg.noise_points {
        points.push(RadarPoint::new(
            rng.uniform(grid.x_range[0], grid.x_range[1]),
            rng.uniform(grid.y_range[0], grid.y_range[1]),
            rng.uniform(grid.z_range[0], grid.z_range[1]),
            rng.uniform(cfg.noise_rcs[0], cfg.noise_rcs[1]),
            rng.uniform(cfg.velocity[0], cfg.velocity[1]),
        ));
    }
    Ok(Scene {
        cloud: PointCloud::new(format!("scene-{seed}"), points),
        boxes,
        seed,
    })
}

/// The reference single-target scene on the default grid.
pub fn scripted_scene(seed: u64) -> Scene {
    gen_scene(&SceneConfig::default(), &GridSpec::default(), &mut Rng::new(seed, 0))
        .expect("default scene config is valid")
}
