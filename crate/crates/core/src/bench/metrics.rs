//! Robustness metrics on BEV heatmaps and point clouds.

use std::path::Path;

use crate::error::{Error, Result};
use crate::expand::Heatmap;
use crate::io::netpbm::{read_pnm, write_pnm, Pnm};
use crate::types::{BoxAnnotation, GridSpec, PointCloud};

/// In-box to out-of-box amplitude ratio.
///
/// The numerator averages `|h|` over every cell whose center lies in some
/// box footprint; the denominator averages `|h|` over nonzero cells outside
/// all boxes. With no such cell the ratio is `+inf`.
pub fn metric_snr(bev: &Heatmap, boxes: &[BoxAnnotation], spec: &GridSpec) -> Result<f64> {
    if bev.nx != spec.nx() || bev.ny != spec.ny() {
        return Err(Error::DimensionMismatch(format!(
            "heatmap {}x{} vs grid {}x{}",
            bev.nx,
            bev.ny,
            spec.nx(),
            spec.ny()
        )));
    }
    let (mut in_sum, mut in_n, mut out_sum, mut out_n) = (0.0, 0usize, 0.0, 0usize);
    for ix in 0..bev.nx {
        for iy in 0..bev.ny {
            let c = spec.cell_center([ix, iy, 0]);
            let v = bev.get(ix, iy).abs();
            if boxes.iter().any(|b| b.contains_xy(c[0], c[1])) {
                in_sum += v;
                in_n += 1;
            } else if v != 0.0 {
                out_sum += v;
                out_n += 1;
            }
        }
    }
    if in_n == 0 {
        return Err(Error::Precondition("no heatmap cell lies inside a box".into()));
    }
    if out_n == 0 {
        return Ok(f64::INFINITY);
    }
    Ok((in_sum / in_n as f64) / (out_sum / out_n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakComparison {
    pub consistent: bool,
    pub l2_cells: f64,
}

/// Compares the first-occurrence argmax cells of two equally sized maps.
pub fn metric_peak(clean: &Heatmap, processed: &Heatmap) -> Result<PeakComparison> {
    if clean.nx != processed.nx || clean.ny != processed.ny {
        return Err(Error::DimensionMismatch("heatmaps differ in size".into()));
    }
    let a = clean.argmax();
    let b = processed.argmax();
    let dx = a.0 as f64 - b.0 as f64;
    let dy = a.1 as f64 - b.1 as f64;
    Ok(PeakComparison {
        consistent: a == b,
        l2_cells: dx.hypot(dy),
    })
}

fn mean_nearest(from: &PointCloud, to: &PointCloud) -> f64 {
    from.points
        .iter()
        .map(|p| {
            to.points
                .iter()
                .map(|q| {
                    let d = [p.x - q.x, p.y - q.y, p.z - q.z];
                    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum::<f64>()
        / from.len() as f64
}

/// Symmetric Chamfer distance on positions, meters.
pub fn metric_chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("chamfer distance needs two non-empty clouds"));
    }
    Ok(0.5 * (mean_nearest(a, b) + mean_nearest(b, a)))
}

/// Min-max scaled 8-bit rendering, `floor(255 (v - min) / (max - min))`.
/// A constant map renders as zeros.
pub fn quantize_heatmap(bev: &Heatmap) -> Vec<u8> {
    let (lo, hi) = bev
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    bev.data
        .iter()
        .map(|&v| {
            if span > 0.0 {
                (255.0 * (v - lo) / span).floor().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect()
}

/// Writes a P5 image with `nx` rows and `ny` columns.
pub fn emit_heatmap(bev: &Heatmap, path: impl AsRef<Path>) -> Result<()> {
    let img = Pnm::new(bev.ny, bev.nx, 1, quantize_heatmap(bev))?;
    write_pnm(path, &img)
}

/// Reads back a heatmap written by [`emit_heatmap`] as raw 8-bit levels.
pub fn read_heatmap_levels(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let img = read_pnm(path)?;
    if img.channels != 1 {
        return Err(Error::format("netpbm", "heatmaps are single-channel"));
    }
    Ok((img.height, img.width, img.data))
}
