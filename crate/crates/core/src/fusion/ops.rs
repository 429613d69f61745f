//! Pointwise fusion ops and the output convolution, each with its VJP.

use super::feature::{ConfidenceMap, FeatureMap};
use super::params::{Affine, ConfidenceMlp, Conv3x3, FusionParams, LayerNormParams, LN_EPS};
use crate::error::{Error, Result};

/// Standardization statistics of one channel column.
struct Standardized {
    xhat: Vec<f64>,
    denom: f64,
    floored: bool,
}

/// `(x - mean) / sqrt(max(var, eps))`. Above the floor this is exactly
/// invariant to positive rescaling of `x`.
fn standardize(x: &[f64]) -> Standardized {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let floored = var <= LN_EPS;
    let denom = if floored { LN_EPS.sqrt() } else { var.sqrt() };
    Standardized {
        xhat: x.iter().map(|v| (v - mean) / denom).collect(),
        denom,
        floored,
    }
}

fn check_ln(f: &FeatureMap, params: &LayerNormParams) -> Result<()> {
    if params.channels() != f.c || params.shift.len() != f.c {
        return Err(Error::DimensionMismatch(format!(
            "layer norm for {} channels applied to {}",
            params.channels(),
            f.c
        )));
    }
    Ok(())
}

/// Normalizes across channels at every cell, then applies per-channel scale
/// and shift.
pub fn layer_norm(f: &FeatureMap, params: &LayerNormParams) -> Result<FeatureMap> {
    check_ln(f, params)?;
    let mut out = FeatureMap::zeros(f.c, f.h, f.w);
    for cell in 0..f.cells() {
        let s = standardize(&f.column(cell));
        let y: Vec<f64> = s
            .xhat
            .iter()
            .enumerate()
            .map(|(c, xh)| params.scale[c] * xh + params.shift[c])
            .collect();
        out.set_column(cell, &y);
    }
    Ok(out)
}

pub fn layer_norm_vjp(f: &FeatureMap, params: &LayerNormParams, grad: &FeatureMap) -> Result<FeatureMap> {
    check_ln(f, params)?;
    let n = f.c as f64;
    let mut out = FeatureMap::zeros(f.c, f.h, f.w);
    for cell in 0..f.cells() {
        let s = standardize(&f.column(cell));
        let g_hat: Vec<f64> = grad
            .column(cell)
            .iter()
            .zip(&params.scale)
            .map(|(g, a)| g * a)
            .collect();
        let mean_g = g_hat.iter().sum::<f64>() / n;
        let mean_gx = if s.floored {
            0.0
        } else {
            g_hat.iter().zip(&s.xhat).map(|(g, x)| g * x).sum::<f64>() / n
        };
        let gx: Vec<f64> = g_hat
            .iter()
            .zip(&s.xhat)
            .map(|(g, x)| (g - mean_g - x * mean_gx) / s.denom)
            .collect();
        out.set_column(cell, &gx);
    }
    Ok(out)
}

/// Applies `a` at every cell.
pub(crate) fn pointwise(a: &Affine, f: &FeatureMap) -> Result<FeatureMap> {
    if a.in_dim != f.c {
        return Err(Error::DimensionMismatch(format!(
            "projection expects {} channels, got {}",
            a.in_dim, f.c
        )));
    }
    let mut out = FeatureMap::zeros(a.out_dim, f.h, f.w);
    for cell in 0..f.cells() {
        out.set_column(cell, &a.apply(&f.column(cell)));
    }
    Ok(out)
}

pub(crate) fn pointwise_vjp(a: &Affine, grad: &FeatureMap) -> FeatureMap {
    let mut out = FeatureMap::zeros(a.in_dim, grad.h, grad.w);
    for cell in 0..grad.cells() {
        out.set_column(cell, &a.transpose_apply(&grad.column(cell)));
    }
    out
}

fn relu(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

/// Probability of the first of two logits, kept strictly inside `(0, 1)`.
/// Returns the probability and whether it was clamped.
fn two_way_softmax(l0: f64, l1: f64) -> (f64, bool) {
    let p = 1.0 / (1.0 + (l1 - l0).exp());
    if p >= 1.0 {
        (1.0 - f64::EPSILON / 2.0, true)
    } else if p <= 0.0 {
        (f64::MIN_POSITIVE, true)
    } else {
        (p, false)
    }
}

fn check_mlp(f: &FeatureMap, mlp: &ConfidenceMlp) -> Result<()> {
    if mlp.hidden.in_dim != f.c || mlp.out.out_dim != 2 || mlp.out.in_dim != mlp.hidden.out_dim {
        return Err(Error::DimensionMismatch(format!(
            "confidence MLP {}→{}→{} applied to {} channels",
            mlp.hidden.in_dim, mlp.hidden.out_dim, mlp.out.out_dim, f.c
        )));
    }
    Ok(())
}

/// Per-cell camera confidence: MLP to two logits, softmax, first channel.
pub fn confidence_map(f_image: &FeatureMap, mlp: &ConfidenceMlp) -> Result<ConfidenceMap> {
    check_mlp(f_image, mlp)?;
    let data = (0..f_image.cells())
        .map(|cell| {
            let hidden = relu(mlp.hidden.apply(&f_image.column(cell)));
            let logits = mlp.out.apply(&hidden);
            two_way_softmax(logits[0], logits[1]).0
        })
        .collect();
    ConfidenceMap::new(f_image.h, f_image.w, data)
}

/// `grad` holds one value per cell.
pub fn confidence_map_vjp(f_image: &FeatureMap, mlp: &ConfidenceMlp, grad: &[f64]) -> Result<FeatureMap> {
    check_mlp(f_image, mlp)?;
    if grad.len() != f_image.cells() {
        return Err(Error::DimensionMismatch("confidence cotangent size".into()));
    }
    let mut out = FeatureMap::zeros(f_image.c, f_image.h, f_image.w);
    for (cell, g) in grad.iter().enumerate() {
        let pre = mlp.hidden.apply(&f_image.column(cell));
        let hidden = relu(pre.clone());
        let logits = mlp.out.apply(&hidden);
        let (p, clamped) = two_way_softmax(logits[0], logits[1]);
        if clamped {
            continue;
        }
        let gl0 = g * p * (1.0 - p);
        let g_hidden = mlp.out.transpose_apply(&[gl0, -gl0]);
        let g_pre: Vec<f64> = g_hidden
            .iter()
            .zip(&pre)
            .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
            .collect();
        out.set_column(cell, &mlp.hidden.transpose_apply(&g_pre));
    }
    Ok(out)
}

fn check_conf(f: &FeatureMap, m: &ConfidenceMap) -> Result<()> {
    if f.h != m.h || f.w != m.w {
        return Err(Error::DimensionMismatch(format!(
            "confidence {}x{} vs features {}x{}",
            m.h, m.w, f.h, f.w
        )));
    }
    Ok(())
}

/// `(M_c · f_I, (1 - M_c) · f_p)`, broadcasting the confidence over channels.
pub fn weight_features(
    f_image: &FeatureMap,
    f_radar: &FeatureMap,
    m: &ConfidenceMap,
) -> Result<(FeatureMap, FeatureMap)> {
    check_conf(f_image, m)?;
    check_conf(f_radar, m)?;
    let n = m.data.len();
    let mut fi = f_image.clone();
    for (i, v) in fi.data.iter_mut().enumerate() {
        *v *= m.data[i % n];
    }
    let mut fp = f_radar.clone();
    for (i, v) in fp.data.iter_mut().enumerate() {
        *v *= 1.0 - m.data[i % n];
    }
    Ok((fi, fp))
}

/// Gradients `(d f_I, d f_p, d M_c)`.
pub fn weight_features_vjp(
    f_image: &FeatureMap,
    f_radar: &FeatureMap,
    m: &ConfidenceMap,
    grad_image: &FeatureMap,
    grad_radar: &FeatureMap,
) -> Result<(FeatureMap, FeatureMap, Vec<f64>)> {
    check_conf(f_image, m)?;
    check_conf(f_radar, m)?;
    let n = m.data.len();
    let mut g_m = vec![0.0; n];
    let mut gi = grad_image.clone();
    for (i, v) in gi.data.iter_mut().enumerate() {
        g_m[i % n] += f_image.data[i] * *v;
        *v *= m.data[i % n];
    }
    let mut gp = grad_radar.clone();
    for (i, v) in gp.data.iter_mut().enumerate() {
        g_m[i % n] -= f_radar.data[i] * *v;
        *v *= 1.0 - m.data[i % n];
    }
    Ok((gi, gp, g_m))
}

/// Query map `W · [LN(f_I); LN(f_p)]`.
pub fn aggregate(f_image: &FeatureMap, f_radar: &FeatureMap, params: &FusionParams) -> Result<FeatureMap> {
    f_image.check_spatial(f_radar, "aggregate")?;
    let cat = FeatureMap::concat(
        &layer_norm(f_image, &params.ln_image)?,
        &layer_norm(f_radar, &params.ln_radar)?,
    )?;
    pointwise(&params.agg_w, &cat)
}

pub fn aggregate_vjp(
    f_image: &FeatureMap,
    f_radar: &FeatureMap,
    params: &FusionParams,
    grad: &FeatureMap,
) -> Result<(FeatureMap, FeatureMap)> {
    f_image.check_spatial(f_radar, "aggregate")?;
    let g_cat = pointwise_vjp(&params.agg_w, grad);
    let (gi, gp) = g_cat.split(f_image.c);
    Ok((
        layer_norm_vjp(f_image, &params.ln_image, &gi)?,
        layer_norm_vjp(f_radar, &params.ln_radar, &gp)?,
    ))
}

/// `[LN(f_I^c); LN(f_p^c)]` with the weighted-branch layer norms.
pub fn concat_mm(
    f_image_c: &FeatureMap,
    f_radar_c: &FeatureMap,
    params: &FusionParams,
) -> Result<FeatureMap> {
    f_image_c.check_spatial(f_radar_c, "concat_mm")?;
    FeatureMap::concat(
        &layer_norm(f_image_c, &params.ln_weighted_image)?,
        &layer_norm(f_radar_c, &params.ln_weighted_radar)?,
    )
}

pub fn concat_mm_vjp(
    f_image_c: &FeatureMap,
    f_radar_c: &FeatureMap,
    params: &FusionParams,
    grad: &FeatureMap,
) -> Result<(FeatureMap, FeatureMap)> {
    f_image_c.check_spatial(f_radar_c, "concat_mm")?;
    let (gi, gp) = grad.split(f_image_c.c);
    Ok((
        layer_norm_vjp(f_image_c, &params.ln_weighted_image, &gi)?,
        layer_norm_vjp(f_radar_c, &params.ln_weighted_radar, &gp)?,
    ))
}

fn check_conv(conv: &Conv3x3, f: &FeatureMap) -> Result<()> {
    if conv.c_in != f.c {
        return Err(Error::DimensionMismatch(format!(
            "convolution expects {} channels, got {}",
            conv.c_in, f.c
        )));
    }
    Ok(())
}

/// Same-size 3×3 convolution with zero padding.
pub fn conv3x3(f: &FeatureMap, conv: &Conv3x3) -> Result<FeatureMap> {
    check_conv(conv, f)?;
    let (h, w) = (f.h as isize, f.w as isize);
    let mut out = FeatureMap::zeros(conv.c_out, f.h, f.w);
    for co in 0..conv.c_out {
        for y in 0..h {
            for x in 0..w {
                let mut acc = conv.bias[co];
                for ci in 0..conv.c_in {
                    for ky in 0..3 {
                        let sy = y + ky as isize - 1;
                        if sy < 0 || sy >= h {
                            continue;
                        }
                        for kx in 0..3 {
                            let sx = x + kx as isize - 1;
                            if sx < 0 || sx >= w {
                                continue;
                            }
                            acc += conv.w(co, ci, ky, kx) * f.get(ci, sy as usize, sx as usize);
                        }
                    }
                }
                let i = out.idx(co, y as usize, x as usize);
                out.data[i] = acc;
            }
        }
    }
    Ok(out)
}

pub fn conv3x3_vjp(f: &FeatureMap, conv: &Conv3x3, grad: &FeatureMap) -> Result<FeatureMap> {
    check_conv(conv, f)?;
    let (h, w) = (f.h as isize, f.w as isize);
    let mut out = FeatureMap::zeros(f.c, f.h, f.w);
    for co in 0..conv.c_out {
        for y in 0..h {
            for x in 0..w {
                let g = grad.get(co, y as usize, x as usize);
                for ci in 0..conv.c_in {
                    for ky in 0..3 {
                        let sy = y + ky as isize - 1;
                        if sy < 0 || sy >= h {
                            continue;
                        }
                        for kx in 0..3 {
                            let sx = x + kx as isize - 1;
                            if sx < 0 || sx >= w {
                                continue;
                            }
                            let i = out.idx(ci, sy as usize, sx as usize);
                            out.data[i] += conv.w(co, ci, ky, kx) * g;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
