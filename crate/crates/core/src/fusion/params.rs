//! Fusion parameters and their binary file format.
//!
//! The parameter file is little-endian: magic `CMCA`, version `u32`, then
//! `C H W heads points` as `u32`, then every parameter block as `f64` in
//! declaration order. A text manifest lists one block per line as
//! `name shape byte_offset`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const LN_EPS: f64 = 1e-5;
pub const CONF_HIDDEN: usize = 16;
pub const DEFAULT_HEADS: usize = 8;
pub const DEFAULT_POINTS: usize = 2;

const MAGIC: &[u8; 4] = b"CMCA";
const VERSION: u32 = 1;
const HEADER_BYTES: usize = 4 + 4 + 5 * 4;

/// Per-channel scale and shift applied after standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

impl LayerNormParams {
    pub fn identity(c: usize) -> Self {
        Self {
            scale: vec![1.0; c],
            shift: vec![0.0; c],
        }
    }

    fn seeded(c: usize, rng: &mut Rng) -> Self {
        Self {
            scale: (0..c).map(|_| 1.0 + 0.1 * rng.standard_normal()).collect(),
            shift: (0..c).map(|_| 0.1 * rng.standard_normal()).collect(),
        }
    }

    pub fn channels(&self) -> usize {
        self.scale.len()
    }
}

/// Dense `out × in` map applied independently at every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub out_dim: usize,
    pub in_dim: usize,
    /// Row-major `out_dim × in_dim`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Affine {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            out_dim,
            in_dim,
            weight: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Weights `~ N(0, gain² / in_dim)`, biases `~ N(0, 0.01)`.
    pub fn seeded(out_dim: usize, in_dim: usize, gain: f64, rng: &mut Rng) -> Self {
        let std = gain / (in_dim as f64).sqrt();
        Self {
            out_dim,
            in_dim,
            weight: (0..out_dim * in_dim).map(|_| std * rng.standard_normal()).collect(),
            bias: (0..out_dim).map(|_| 0.1 * rng.standard_normal()).collect(),
        }
    }

    /// Copies the first `out_dim` inputs through unchanged.
    pub fn selector(out_dim: usize, in_dim: usize, offset: usize) -> Self {
        let mut a = Self::zeros(out_dim, in_dim);
        for o in 0..out_dim {
            a.weight[o * in_dim + offset + o] = 1.0;
        }
        a
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|o| {
                let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias[o]
            })
            .collect()
    }

    /// `Wᵀ g`.
    pub fn transpose_apply(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.in_dim];
        for (o, go) in g.iter().enumerate() {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            for (acc, w) in out.iter_mut().zip(row) {
                *acc += w * go;
            }
        }
        out
    }
}

/// `C → 16 → 2` with a rectifier on the hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMlp {
    pub hidden: Affine,
    pub out: Affine,
}

impl ConfidenceMlp {
    pub fn zeros(c: usize) -> Self {
        Self {
            hidden: Affine::zeros(CONF_HIDDEN, c),
            out: Affine::zeros(2, CONF_HIDDEN),
        }
    }
}

/// One deformable cross-attention branch.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformAttnParams {
    pub heads: usize,
    pub points: usize,
    /// Query → `(dx, dy)` per head and point, laid out `[(h * points + k) * 2 + {0: dx, 1: dy}]`.
    pub offset: Affine,
    /// Query → attention logit per head and point, `[h * points + k]`.
    pub attn: Affine,
    /// Concatenated head outputs → query width.
    pub out: Affine,
}

impl DeformAttnParams {
    pub fn zeros(query_dim: usize, value_dim: usize, heads: usize, points: usize) -> Self {
        Self {
            heads,
            points,
            offset: Affine::zeros(heads * points * 2, query_dim),
            attn: Affine::zeros(heads * points, query_dim),
            out: Affine::zeros(query_dim, value_dim),
        }
    }

    fn seeded(query_dim: usize, value_dim: usize, heads: usize, points: usize, rng: &mut Rng) -> Self {
        Self {
            heads,
            points,
            offset: Affine::seeded(heads * points * 2, query_dim, 1.0, rng),
            attn: Affine::seeded(heads * points, query_dim, 1.0, rng),
            out: Affine::seeded(query_dim, value_dim, 1.0, rng),
        }
    }

    pub fn query_dim(&self) -> usize {
        self.offset.in_dim
    }

    pub fn value_dim(&self) -> usize {
        self.out.in_dim
    }
}

/// 3×3 convolution with zero padding, weight layout `[co][ci][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3x3 {
    pub c_out: usize,
    pub c_in: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv3x3 {
    pub fn identity(c: usize) -> Self {
        let mut weight = vec![0.0; c * c * 9];
        for ch in 0..c {
            weight[(ch * c + ch) * 9 + 4] = 1.0;
        }
        Self {
            c_out: c,
            c_in: c,
            weight,
            bias: vec![0.0; c],
        }
    }

    fn seeded(c: usize, rng: &mut Rng) -> Self {
        let std = 1.0 / ((9 * c) as f64).sqrt();
        Self {
            c_out: c,
            c_in: c,
            weight: (0..c * c * 9).map(|_| std * rng.standard_normal()).collect(),
            bias: (0..c).map(|_| 0.1 * rng.standard_normal()).collect(),
        }
    }

    #[inline]
    pub(crate) fn w(&self, co: usize, ci: usize, ky: usize, kx: usize) -> f64 {
        self.weight[((co * self.c_in + ci) * 3 + ky) * 3 + kx]
    }
}

/// Callback receiving `(name, shape, values)` for one parameter block.
type Visitor<'a> = dyn FnMut(&str, &[usize], &mut Vec<f64>) + 'a;

/// All weights of the fusion block for `C`-channel inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub channels: usize,
    pub ln_image: LayerNormParams,
    pub ln_radar: LayerNormParams,
    pub ln_weighted_image: LayerNormParams,
    pub ln_weighted_radar: LayerNormParams,
    pub conf_mlp: ConfidenceMlp,
    /// `2C → C` aggregation producing the query.
    pub agg_w: Affine,
    /// Branch attending the plain concatenation.
    pub attn_plain: DeformAttnParams,
    /// Branch attending the confidence-weighted concatenation.
    pub attn_weighted: DeformAttnParams,
    pub out_conv: Conv3x3,
}

impl FusionParams {
    /// Identity layer norms, zero projections, identity convolution.
    pub fn neutral(c: usize, heads: usize, points: usize) -> Self {
        Self {
            channels: c,
            ln_image: LayerNormParams::identity(c),
            ln_radar: LayerNormParams::identity(c),
            ln_weighted_image: LayerNormParams::identity(c),
            ln_weighted_radar: LayerNormParams::identity(c),
            conf_mlp: ConfidenceMlp::zeros(c),
            agg_w: Affine::zeros(c, 2 * c),
            attn_plain: DeformAttnParams::zeros(c, 2 * c, heads, points),
            attn_weighted: DeformAttnParams::zeros(c, 2 * c, heads, points),
            out_conv: Conv3x3::identity(c),
        }
    }

    /// Random initialization, fully determined by `rng`.
    pub fn seeded(c: usize, heads: usize, points: usize, rng: &mut Rng) -> Self {
        Self {
            channels: c,
            ln_image: LayerNormParams::seeded(c, rng),
            ln_radar: LayerNormParams::seeded(c, rng),
            ln_weighted_image: LayerNormParams::seeded(c, rng),
            ln_weighted_radar: LayerNormParams::seeded(c, rng),
            conf_mlp: ConfidenceMlp {
                hidden: Affine::seeded(CONF_HIDDEN, c, 1.0, rng),
                out: Affine::seeded(2, CONF_HIDDEN, 1.0, rng),
            },
            agg_w: Affine::seeded(c, 2 * c, 1.0, rng),
            attn_plain: DeformAttnParams::seeded(c, 2 * c, heads, points, rng),
            attn_weighted: DeformAttnParams::seeded(c, 2 * c, heads, points, rng),
            out_conv: Conv3x3::seeded(c, rng),
        }
    }

    pub fn heads(&self) -> usize {
        self.attn_plain.heads
    }

    pub fn points(&self) -> usize {
        self.attn_plain.points
    }

    /// Visits every block in file order as `(name, shape, values)`.
    fn visit_mut(&mut self, f: &mut Visitor) {
        fn ln(name: &str, p: &mut LayerNormParams, f: &mut Visitor) {
            let c = p.scale.len();
            f(&format!("{name}.scale"), &[c], &mut p.scale);
            f(&format!("{name}.shift"), &[c], &mut p.shift);
        }
        fn affine(name: &str, a: &mut Affine, f: &mut Visitor) {
            f(&format!("{name}.weight"), &[a.out_dim, a.in_dim], &mut a.weight);
            f(&format!("{name}.bias"), &[a.out_dim], &mut a.bias);
        }
        fn attn(name: &str, a: &mut DeformAttnParams, f: &mut Visitor) {
            affine(&format!("{name}.offset"), &mut a.offset, f);
            affine(&format!("{name}.attn"), &mut a.attn, f);
            affine(&format!("{name}.out"), &mut a.out, f);
        }
        ln("ln_image", &mut self.ln_image, f);
        ln("ln_radar", &mut self.ln_radar, f);
        ln("ln_weighted_image", &mut self.ln_weighted_image, f);
        ln("ln_weighted_radar", &mut self.ln_weighted_radar, f);
        affine("conf_mlp.hidden", &mut self.conf_mlp.hidden, f);
        affine("conf_mlp.out", &mut self.conf_mlp.out, f);
        affine("agg_w", &mut self.agg_w, f);
        attn("attn_plain", &mut self.attn_plain, f);
        attn("attn_weighted", &mut self.attn_weighted, f);
        let conv = &mut self.out_conv;
        f("out_conv.weight", &[conv.c_out, conv.c_in, 3, 3], &mut conv.weight);
        f("out_conv.bias", &[conv.c_out], &mut conv.bias);
    }

    /// Structural checks shared by every fusion entry point.
    pub fn validate(&self) -> Result<()> {
        let c = self.channels;
        let ok = self.ln_image.channels() == c
            && self.ln_radar.channels() == c
            && self.ln_weighted_image.channels() == c
            && self.ln_weighted_radar.channels() == c
            && self.conf_mlp.hidden.in_dim == c
            && self.conf_mlp.out.out_dim == 2
            && self.conf_mlp.out.in_dim == self.conf_mlp.hidden.out_dim
            && self.agg_w.in_dim == 2 * c
            && self.agg_w.out_dim == c
            && self.out_conv.c_in == c
            && self.out_conv.c_out == c;
        if !ok {
            return Err(Error::DimensionMismatch(format!(
                "fusion parameters inconsistent with {c} channels"
            )));
        }
        for a in [&self.attn_plain, &self.attn_weighted] {
            if a.query_dim() != c || a.out.out_dim != c || a.value_dim() != 2 * c {
                return Err(Error::DimensionMismatch(
                    "attention widths inconsistent with channel count".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamFileHeader {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub heads: usize,
    pub points: usize,
}

/// Encodes the parameter file and its manifest for maps of `height × width`.
pub fn encode_params(params: &FusionParams, height: usize, width: usize) -> (Vec<u8>, String) {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    for d in [params.channels, height, width, params.heads(), params.points()] {
        bytes.extend_from_slice(&(d as u32).to_le_bytes());
    }
    let mut manifest = String::new();
    let mut copy = params.clone();
    copy.visit_mut(&mut |name, shape, values| {
        let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
        let _ = writeln!(manifest, "{name} {} {}", dims.join("x"), bytes.len());
        for v in values.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    });
    (bytes, manifest)
}

pub fn decode_params(bytes: &[u8]) -> Result<(FusionParams, ParamFileHeader)> {
    if bytes.len() < HEADER_BYTES || &bytes[..4] != MAGIC {
        return Err(Error::format("fusion params", "bad magic or truncated header"));
    }
    let word = |i: usize| {
        u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4-byte slice")) as usize
    };
    if word(0) != VERSION as usize {
        return Err(Error::format("fusion params", format!("unsupported version {}", word(0))));
    }
    let header = ParamFileHeader {
        channels: word(1),
        height: word(2),
        width: word(3),
        heads: word(4),
        points: word(5),
    };
    if header.channels == 0 || header.heads == 0 || header.points == 0 {
        return Err(Error::format("fusion params", "zero dimension in header"));
    }
    let mut params = FusionParams::neutral(header.channels, header.heads, header.points);
    let mut pos = HEADER_BYTES;
    let mut truncated = false;
    params.visit_mut(&mut |_, _, values| {
        for v in values.iter_mut() {
            match bytes.get(pos..pos + 8) {
                Some(b) => *v = f64::from_le_bytes(b.try_into().expect("8-byte slice")),
                None => truncated = true,
            }
            pos += 8;
        }
    });
    if truncated || pos != bytes.len() {
        return Err(Error::format(
            "fusion params",
            format!("expected {pos} bytes, found {}", bytes.len()),
        ));
    }
    Ok((params, header))
}

/// Writes the parameter file and, next to it, `<path>.manifest`.
pub fn write_params(path: impl AsRef<Path>, params: &FusionParams, height: usize, width: usize) -> Result<()> {
    let path = path.as_ref();
    let (bytes, manifest) = encode_params(params, height, width);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let mpath = manifest_path(path);
    std::fs::write(&mpath, manifest).map_err(|e| Error::io(mpath, e))
}

pub fn read_params(path: impl AsRef<Path>) -> Result<(FusionParams, ParamFileHeader)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_params(&bytes)
}

fn manifest_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    s.into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_roundtrip_and_manifest() {
        let p = FusionParams::seeded(4, 2, 2, &mut Rng::new(3, 0));
        let (bytes, manifest) = encode_params(&p, 5, 6);
        let (back, header) = decode_params(&bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(
            header,
            ParamFileHeader {
                channels: 4,
                height: 5,
                width: 6,
                heads: 2,
                points: 2
            }
        );
        let first = manifest.lines().next().unwrap();
        assert_eq!(first, "ln_image.scale 4 28");
        assert!(manifest.contains("out_conv.weight 4x4x3x3 "));
        assert_eq!(manifest.lines().count(), 8 + 4 + 2 + 12 + 2);
        assert!(decode_params(&bytes[..bytes.len() - 8]).is_err());
    }

    #[test]
    fn affine_transpose_is_adjoint() {
        let a = Affine::seeded(3, 5, 1.0, &mut Rng::new(1, 0));
        let x = [0.3, -1.0, 2.0, 0.5, 0.1];
        let g = [1.0, -2.0, 0.25];
        let lhs: f64 = a
            .apply(&x)
            .iter()
            .zip(&a.bias)
            .map(|(y, b)| y - b)
            .zip(&g)
            .map(|(y, g)| y * g)
            .sum();
        let rhs: f64 = a.transpose_apply(&g).iter().zip(&x).map(|(u, v)| u * v).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn seeded_params_validate() {
        let p = FusionParams::seeded(8, DEFAULT_HEADS, DEFAULT_POINTS, &mut Rng::new(0, 0));
        p.validate().unwrap();
        let mut bad = p.clone();
        bad.agg_w = Affine::zeros(8, 8);
        assert!(bad.validate().is_err());
    }
}
