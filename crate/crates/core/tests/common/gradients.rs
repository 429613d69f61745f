//! Finite-difference checks for every fusion operation.

use super::{directional_probes, kink_margin, random_map, worst};
use rcrobust::fusion::*;
use rcrobust::Rng;

pub const C: usize = 8;
pub const H: usize = 5;
pub const W: usize = 5;
pub const PROBES: usize = 20;
pub const STEP: f64 = 1e-5;
pub const SMOOTH_TOL: f64 = 1e-4;
pub const SAMPLING_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

fn params(seed: u64) -> FusionParams {
    FusionParams::seeded(C, DEFAULT_HEADS, DEFAULT_POINTS, &mut Rng::new(seed, 0))
}

fn fm(data: &[f64], c: usize, h: usize, w: usize) -> FeatureMap {
    FeatureMap::new(c, h, w, data.to_vec()).unwrap()
}

fn ln_params(c: usize, rng: &mut Rng) -> LayerNormParams {
    LayerNormParams {
        scale: (0..c).map(|_| rng.uniform(-2.0, 2.0)).collect(),
        shift: (0..c).map(|_| rng.uniform(-0.5, 0.5)).collect(),
    }
}

pub fn layer_norm_check(c: usize, h: usize, w: usize, seed: u64) -> GradCheck {
    let mut rng = Rng::new(seed, 0);
    let f = random_map(c, h, w, &mut rng);
    let p = ln_params(c, &mut rng);
    let probes = directional_probes(
        &[f],
        &|x| layer_norm(&x[0], &p).unwrap().data,
        &|x, g| vec![layer_norm_vjp(&x[0], &p, &fm(g, c, h, w)).unwrap()],
        PROBES,
        STEP,
        &mut rng,
    );
    GradCheck { name: "layer_norm", worst: worst(&probes), tolerance: SMOOTH_TOL }
}

pub fn confidence_check(c: usize, h: usize, w: usize, seed: u64) -> GradCheck {
    let mut rng = Rng::new(seed, 0);
    let f = random_map(c, h, w, &mut rng);
    let mlp = FusionParams::seeded(c, 2, 2, &mut Rng::new(seed + 1, 0)).conf_mlp;
    let probes = directional_probes(
        &[f],
        &|x| confidence_map(&x[0], &mlp).unwrap().data,
        &|x, g| vec![confidence_map_vjp(&x[0], &mlp, g).unwrap()],
        PROBES,
        STEP,
        &mut rng,
    );
    GradCheck { name: "confidence_map", worst: worst(&probes), tolerance: SMOOTH_TOL }
}

/// `weight_features` driven by the confidence branch, so the gradient with
/// respect to the confidence map is exercised too.
pub fn weight_features_check(seed: u64) -> GradCheck {
    let mut rng = Rng::new(seed, 0);
    let p = params(seed + 1);
    let inputs = [random_map(C, H, W, &mut rng), random_map(C, H, W, &mut rng)];
    let forward = |x: &[FeatureMap]| {
        let m = confidence_map(&x[0], &p.conf_mlp).unwrap();
        let (a, b) = weight_features(&x[0], &x[1], &m).unwrap();
        FeatureMap::concat(&a, &b).unwrap().data
    };
    let probes = directional_probes(
        &inputs,
        &forward,
        &|x, g| {
            let m = confidence_map(&x[0], &p.conf_mlp).unwrap();
            let (ga, gb) = fm(g, 2 * C, H, W).split(C);
            let (gi, gp, gm) = weight_features_vjp(&x[0], &x[1], &m, &ga, &gb).unwrap();
            let gi = gi.add(&confidence_map_vjp(&x[0], &p.conf_mlp, &gm).unwrap());
            vec![gi, gp]
        },
        PROBES,
        STEP,
        &mut rng,
    );
    GradCheck { name: "weight_features", worst: worst(&probes), tolerance: SMOOTH_TOL }
}

pub fn aggregate_check(seed: u64) -> GradCheck {
    let mut rng = Rng::new(seed, 0);
    let p = params(seed + 1);
    let inputs = [random_map(C, H, W, &mut rng), random_map(C, H, W, &mut rng)];
    let probes = directional_probes(
        &inputs,
        &|x| aggregate(&x[0], &x[1], &p).unwrap().data,
        &|x, g| {
            let (a, b) = aggregate_vjp(&x[0], &x[1], &p, &fm(g, C, H, W)).unwrap();
            vec![a, b]
        },
        PROBES,
        STEP,
        &mut rng,
    );
    GradCheck { name: "aggregate", worst: worst(&probes), tolerance: SMOOTH_TOL }
}

pub fn concat_mm_check(seed: u64) -> GradCheck {
    let mut rng = Rng::new(seed, 0);
    let p = params(seed + 1);
    let inputs = [random_map(C, H, W, &mut rng), random_map(C, H, W, &mut rng)];
    let probes = directional_probes(
        &inputs,
        &|x| concat_mm(&x[0], &x[1], &p).unwrap().data,
        &|x, g| {
            let (a, b) = concat_mm_vjp(&x[0], &x[1], &p, &fm(g, 2 * C, H, W)).unwrap();
            vec![a, b]
        },
        PROBES,
        STEP,
        &mut rng,
    );
    GradCheck { name: "concat_mm", worst: worst(&probes), tolerance: SMOOTH_TOL }
}

pub fn conv3x3_check(seed: u64) -> GradCheck {
    let mut rng = Rng::new(seed, 0);
    let conv = params(seed + 1).out_conv;
    let f = random_map(C, H, W, &mut rng);
    let probes = directional_probes(
        &[f],
        &|x| conv3x3(&x[0], &conv).unwrap().data,
        &|x, g| vec![conv3x3_vjp(&x[0], &conv, &fm(g, C, H, W)).unwrap()],
        PROBES,
        STEP,
        &mut rng,
    );
    GradCheck { name: "conv3x3", worst: worst(&probes), tolerance: SMOOTH_TOL }
}

/// Inputs are re-drawn until every sampling coordinate sits at least 1e-3
/// away from a bilinear kink.
pub fn deform_attention_check(seed: u64) -> GradCheck {
    let mut rng = Rng::new(seed, 0);
    let p = params(seed + 1).attn_plain;
    let (q, v) = loop {
        let q = random_map(C, H, W, &mut rng);
        let v = random_map(2 * C, H, W, &mut rng);
        if kink_margin(&sampling_locations(&q, &p).unwrap()) > 1e-3 {
            break (q, v);
        }
    };
    let probes = directional_probes(
        &[q, v],
        &|x| deform_cross_attention(&x[0], &x[1], &p).unwrap().data,
        &|x, g| {
            let (a, b) = deform_cross_attention_vjp(&x[0], &x[1], &p, &fm(g, C, H, W)).unwrap();
            vec![a, b]
        },
        PROBES,
        STEP,
        &mut rng,
    );
    GradCheck { name: "deform_cross_attention", worst: worst(&probes), tolerance: SAMPLING_TOL }
}

pub fn fuse_bev_check(seed: u64) -> GradCheck {
    let mut rng = Rng::new(seed, 0);
    let p = params(seed + 1);
    let (fi, fp) = loop {
        let fi = random_map(C, H, W, &mut rng);
        let fp = random_map(C, H, W, &mut rng);
        let q = aggregate(&fi, &fp, &p).unwrap();
        let margin = kink_margin(&sampling_locations(&q, &p.attn_plain).unwrap())
            .min(kink_margin(&sampling_locations(&q, &p.attn_weighted).unwrap()));
        if margin > 1e-3 {
            break (fi, fp);
        }
    };
    let probes = directional_probes(
        &[fi, fp],
        &|x| fuse_bev(&x[0], &x[1], &p).unwrap().data,
        &|x, g| {
            let (a, b) = fuse_bev_vjp(&x[0], &x[1], &p, &fm(g, C, H, W)).unwrap();
            vec![a, b]
        },
        PROBES,
        STEP,
        &mut rng,
    );
    GradCheck { name: "fuse_bev", worst: worst(&probes), tolerance: SAMPLING_TOL }
}

/// Every operation at `C = 8`, `5 × 5`.
pub fn full_suite() -> Vec<GradCheck> {
    vec![
        layer_norm_check(C, H, W, 21),
        confidence_check(C, H, W, 23),
        weight_features_check(6),
        aggregate_check(4),
        concat_mm_check(25),
        conv3x3_check(27),
        deform_attention_check(8),
        fuse_bev_check(10),
    ]
}
