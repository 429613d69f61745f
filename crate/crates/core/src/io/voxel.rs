//! Flat binary voxel grid dump.
//!
//! Layout (little-endian): magic `RCVG`, version `u32`, `nx ny nz` as `u32`,
//! the six range bounds `xmin xmax ymin ymax zmin zmax` as `f64`, then the
//! rcs field (`f64`), the vel field (`f64`) and the count field (`u32`), each
//! in x-major order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{GridSpec, VoxelGrid};

pub const MAGIC: &[u8; 4] = b"RCVG";
pub const VERSION: u32 = 1;

pub fn encode_voxel_grid(grid: &VoxelGrid) -> Vec<u8> {
    let s = &grid.spec;
    let n = s.len();
    let mut out = Vec::with_capacity(4 + 16 + 48 + n * 20);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for c in s.cells {
        out.extend_from_slice(&(c as u32).to_le_bytes());
    }
    for r in s.ranges() {
        out.extend_from_slice(&r[0].to_le_bytes());
        out.extend_from_slice(&r[1].to_le_bytes());
    }
    for v in &grid.rcs {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &grid.vel {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for c in &grid.count {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let chunk = self
            .bytes
            .get(self.pos..self.pos + N)
            .ok_or_else(|| Error::format("voxel grid", "truncated"))?;
        self.pos += N;
        Ok(chunk.try_into().expect("slice length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn decode_voxel_grid(bytes: &[u8]) -> Result<VoxelGrid> {
    let mut cur = Cursor { bytes, pos: 0 };
    if &cur.take::<4>()? != MAGIC {
        return Err(Error::format("voxel grid", "bad magic"));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::format("voxel grid", format!("unsupported version {version}")));
    }
    let cells = [cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize];
    let mut r = [0.0; 6];
    for v in r.iter_mut() {
        *v = cur.f64()?;
    }
    let spec = GridSpec::new([r[0], r[1]], [r[2], r[3]], [r[4], r[5]], cells)?;
    let n = spec.len();
    let rcs = (0..n).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
    let vel = (0..n).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
    let count = (0..n).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
    if cur.pos != bytes.len() {
        return Err(Error::format("voxel grid", "trailing bytes"));
    }
    VoxelGrid::from_fields(spec, rcs, vel, count)
}

pub fn write_voxel_grid(path: impl AsRef<Path>, grid: &VoxelGrid) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_voxel_grid(grid)).map_err(|e| Error::io(path, e))
}

pub fn read_voxel_grid(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_voxel_grid(&bytes)
}
