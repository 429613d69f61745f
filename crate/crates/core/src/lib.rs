//! Radar/camera corruption simulation, 3D Gaussian expansion of radar voxels,
//! confidence-guided radar/camera fusion numerics, and a synthetic robustness
//! benchmark built on top of them.
//!
//! The crate is organised bottom-up:
//!
//! * [`types`] and [`rng`] hold the shared geometry and randomness.
//! * [`radar`] and [`image`] corrupt radar clouds and camera frames.
//! * [`expand`] voxelizes radar clouds and applies Gaussian expansion.
//! * [`fusion`] is the confidence-guided cross-attention core with analytic
//!   gradients.
//! * [`bench`] generates synthetic scenes, sweeps corruptions and reports
//!   metrics.

pub mod bench;
pub mod error;
pub mod expand;
pub mod fusion;
pub mod image;
pub mod io;
pub mod radar;
pub mod rng;
pub mod types;

pub use error::{Error, Result};
pub use rng::Rng;
pub use types::{BoxAnnotation, GridSpec, PointCloud, RadarPoint, Scene, VoxelGrid};
