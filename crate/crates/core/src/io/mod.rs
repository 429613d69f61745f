//! File formats: point/box CSV, binary PGM/PPM, and the voxel grid dump.

pub mod netpbm;
pub mod tables;
pub mod voxel;

pub use netpbm::{read_pnm, write_pnm, Pnm};
pub use tables::{read_boxes, read_cloud, read_clouds, write_boxes, write_cloud};
pub use voxel::{read_voxel_grid, write_voxel_grid};
