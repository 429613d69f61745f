//! Single-scale deformable cross-attention with clamped bilinear sampling.

use super::feature::FeatureMap;
use super::ops::pointwise_vjp;
use super::params::DeformAttnParams;
use crate::error::{Error, Result};

/// Bilinear stencil at a clamped fractional location.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
    fx: f64,
    fy: f64,
    /// Whether the raw coordinate was inside the map (derivative passes).
    live_x: bool,
    live_y: bool,
}

impl Stencil {
    fn new(sx: f64, sy: f64, h: usize, w: usize) -> Self {
        let max_x = (w - 1) as f64;
        let max_y = (h - 1) as f64;
        let cx = sx.clamp(0.0, max_x);
        let cy = sy.clamp(0.0, max_y);
        let x0 = cx.floor() as usize;
        let y0 = cy.floor() as usize;
        Self {
            x0,
            x1: (x0 + 1).min(w - 1),
            y0,
            y1: (y0 + 1).min(h - 1),
            fx: cx - x0 as f64,
            fy: cy - y0 as f64,
            live_x: sx > 0.0 && sx < max_x,
            live_y: sy > 0.0 && sy < max_y,
        }
    }

    fn corners(&self) -> [(usize, usize, f64); 4] {
        let (fx, fy) = (self.fx, self.fy);
        [
            (self.y0, self.x0, (1.0 - fy) * (1.0 - fx)),
            (self.y0, self.x1, (1.0 - fy) * fx),
            (self.y1, self.x0, fy * (1.0 - fx)),
            (self.y1, self.x1, fy * fx),
        ]
    }

    fn sample(&self, map: &FeatureMap, ch: usize) -> f64 {
        self.corners()
            .iter()
            .map(|&(y, x, wgt)| wgt * map.get(ch, y, x))
            .sum()
    }

    /// `(∂/∂sx, ∂/∂sy)` of the sample in channel `ch`.
    fn grad_coords(&self, map: &FeatureMap, ch: usize) -> (f64, f64) {
        let v00 = map.get(ch, self.y0, self.x0);
        let v01 = map.get(ch, self.y0, self.x1);
        let v10 = map.get(ch, self.y1, self.x0);
        let v11 = map.get(ch, self.y1, self.x1);
        let dx = (1.0 - self.fy) * (v01 - v00) + self.fy * (v11 - v10);
        let dy = (1.0 - self.fx) * (v10 - v00) + self.fx * (v11 - v01);
        (
            if self.live_x { dx } else { 0.0 },
            if self.live_y { dy } else { 0.0 },
        )
    }
}

/// Samples channel `ch` of `map` at fractional `(x, y)`, clamping to the border.
pub fn bilinear_sample(map: &FeatureMap, ch: usize, x: f64, y: f64) -> f64 {
    Stencil::new(x, y, map.h, map.w).sample(map, ch)
}

fn check(query: &FeatureMap, value: &FeatureMap, p: &DeformAttnParams) -> Result<()> {
    query.check_spatial(value, "deformable attention")?;
    if p.heads == 0 || !value.c.is_multiple_of(p.heads) {
        return Err(Error::InvalidArgument(format!(
            "value channels {} not divisible by {} heads",
            value.c, p.heads
        )));
    }
    if p.query_dim() != query.c
        || p.value_dim() != value.c
        || p.offset.out_dim != p.heads * p.points * 2
        || p.attn.out_dim != p.heads * p.points
        || p.attn.in_dim != query.c
    {
        return Err(Error::DimensionMismatch(format!(
            "attention parameters do not fit query {} / value {} channels",
            query.c, value.c
        )));
    }
    Ok(())
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Per-cell sampling plan shared by the forward and backward passes.
struct CellPlan {
    /// `[head][point]` stencils.
    stencils: Vec<Vec<Stencil>>,
    /// `[head][point]` softmax weights.
    weights: Vec<Vec<f64>>,
}

fn plan(query: &FeatureMap, value: &FeatureMap, p: &DeformAttnParams, cell: usize) -> CellPlan {
    let q = query.column(cell);
    let offsets = p.offset.apply(&q);
    let logits = p.attn.apply(&q);
    let (y, x) = (cell / query.w, cell % query.w);
    let stencils = (0..p.heads)
        .map(|h| {
            (0..p.points)
                .map(|k| {
                    let o = (h * p.points + k) * 2;
                    Stencil::new(x as f64 + offsets[o], y as f64 + offsets[o + 1], value.h, value.w)
                })
                .collect()
        })
        .collect();
    let weights = (0..p.heads)
        .map(|h| softmax(&logits[h * p.points..(h + 1) * p.points]))
        .collect();
    CellPlan { stencils, weights }
}

/// Raw (unclamped) sampling coordinates `(x, y)` for every query cell, head
/// and point, in that nesting order.
pub fn sampling_locations(
    query: &FeatureMap,
    params: &DeformAttnParams,
) -> Result<Vec<(f64, f64)>> {
    if params.query_dim() != query.c || params.offset.out_dim != params.heads * params.points * 2 {
        return Err(Error::DimensionMismatch("offset projection does not fit query".into()));
    }
    let mut locs = Vec::with_capacity(query.cells() * params.heads * params.points);
    for cell in 0..query.cells() {
        let offsets = params.offset.apply(&query.column(cell));
        let (y, x) = (cell / query.w, cell % query.w);
        for pair in offsets.chunks_exact(2) {
            locs.push((x as f64 + pair[0], y as f64 + pair[1]));
        }
    }
    Ok(locs)
}

/// For every query cell and head, samples the head's value slice at
/// `points` query-predicted offsets, mixes them with softmax weights, and
/// projects the concatenated heads back to the query width.
pub fn deform_cross_attention(
    query: &FeatureMap,
    value: &FeatureMap,
    params: &DeformAttnParams,
) -> Result<FeatureMap> {
    check(query, value, params)?;
    let head_dim = value.c / params.heads;
    let mut out = FeatureMap::zeros(params.out.out_dim, query.h, query.w);
    for cell in 0..query.cells() {
        let pl = plan(query, value, params, cell);
        let mut heads = vec![0.0; value.c];
        for h in 0..params.heads {
            for k in 0..params.points {
                let st = &pl.stencils[h][k];
                let wk = pl.weights[h][k];
                for d in 0..head_dim {
                    let ch = h * head_dim + d;
                    heads[ch] += wk * st.sample(value, ch);
                }
            }
        }
        out.set_column(cell, &params.out.apply(&heads));
    }
    Ok(out)
}

/// Gradients with respect to `(query, value)`.
pub fn deform_cross_attention_vjp(
    query: &FeatureMap,
    value: &FeatureMap,
    params: &DeformAttnParams,
    grad: &FeatureMap,
) -> Result<(FeatureMap, FeatureMap)> {
    check(query, value, params)?;
    let head_dim = value.c / params.heads;
    let g_heads_map = pointwise_vjp(&params.out, grad);
    let mut g_query = FeatureMap::zeros(query.c, query.h, query.w);
    let mut g_value = FeatureMap::zeros(value.c, value.h, value.w);
    for cell in 0..query.cells() {
        let pl = plan(query, value, params, cell);
        let g_heads = g_heads_map.column(cell);
        let mut g_offsets = vec![0.0; params.offset.out_dim];
        let mut g_logits = vec![0.0; params.attn.out_dim];
        for h in 0..params.heads {
            let mut g_w = vec![0.0; params.points];
            for k in 0..params.points {
                let st = &pl.stencils[h][k];
                let wk = pl.weights[h][k];
                let (mut gsx, mut gsy) = (0.0, 0.0);
                for d in 0..head_dim {
                    let ch = h * head_dim + d;
                    let g = g_heads[ch];
                    g_w[k] += g * st.sample(value, ch);
                    for (y, x, wgt) in st.corners() {
                        let i = g_value.idx(ch, y, x);
                        g_value.data[i] += wk * g * wgt;
                    }
                    let (dx, dy) = st.grad_coords(value, ch);
                    gsx += wk * g * dx;
                    gsy += wk * g * dy;
                }
                let o = (h * params.points + k) * 2;
                g_offsets[o] = gsx;
                g_offsets[o + 1] = gsy;
            }
            let w = &pl.weights[h];
            let mean: f64 = w.iter().zip(&g_w).map(|(a, b)| a * b).sum();
            for k in 0..params.points {
                g_logits[h * params.points + k] = w[k] * (g_w[k] - mean);
            }
        }
        let mut gq = params.offset.transpose_apply(&g_offsets);
        for (a, b) in gq.iter_mut().zip(params.attn.transpose_apply(&g_logits)) {
            *a += b;
        }
        g_query.add_column(cell, &gq);
    }
    Ok((g_query, g_value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::params::Affine;
    use crate::rng::Rng;

    fn random_map(c: usize, h: usize, w: usize, seed: u64) -> FeatureMap {
        let mut rng = Rng::new(seed, 0);
        FeatureMap::from_fn(c, h, w, |_, _, _| rng.standard_normal())
    }

    #[test]
    fn lattice_points_are_exact() {
        let v = random_map(2, 4, 5, 1);
        for y in 0..4 {
            for x in 0..5 {
                assert_eq!(bilinear_sample(&v, 1, x as f64, y as f64), v.get(1, y, x));
            }
        }
    }

    #[test]
    fn midpoint_and_clamp() {
        let v = FeatureMap::new(1, 2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(bilinear_sample(&v, 0, 0.5, 0.5), 1.5);
        assert_eq!(bilinear_sample(&v, 0, -3.0, -3.0), 0.0);
        assert_eq!(bilinear_sample(&v, 0, 9.0, 9.0), 3.0);
        assert_eq!(bilinear_sample(&v, 0, 9.0, 0.25), 1.5);
    }

    #[test]
    fn zero_offsets_attend_to_self() {
        let (c, cv, heads) = (4, 8, 4);
        let q = random_map(c, 3, 3, 2);
        let v = random_map(cv, 3, 3, 3);
        let mut p = DeformAttnParams::zeros(c, cv, heads, 2);
        p.out = Affine::seeded(c, cv, 1.0, &mut Rng::new(4, 0));
        let out = deform_cross_attention(&q, &v, &p).unwrap();
        for cell in 0..9 {
            let expect = p.out.apply(&v.column(cell));
            for (a, b) in out.column(cell).iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn head_divisibility() {
        let q = random_map(4, 2, 2, 1);
        let v = random_map(6, 2, 2, 1);
        let p = DeformAttnParams::zeros(4, 6, 4, 2);
        assert!(matches!(
            deform_cross_attention(&q, &v, &p),
            Err(Error::InvalidArgument(_))
        ));
    }
}
