use super::deform::{deform_cross_attention, deform_cross_attention_vjp};
use super::feature::{ConfidenceMap, FeatureMap};
use super::ops::{
    aggregate, aggregate_vjp, concat_mm, concat_mm_vjp, confidence_map, confidence_map_vjp,
    conv3x3, conv3x3_vjp, weight_features, weight_features_vjp,
};
use super::params::FusionParams;
use crate::error::{Error, Result};

/// Intermediate maps of one fusion forward pass.
#[derive(Debug, Clone)]
pub struct FuseTrace {
    pub query: FeatureMap,
    pub confidence: ConfidenceMap,
    pub image_weighted: FeatureMap,
    pub radar_weighted: FeatureMap,
    pub value_weighted: FeatureMap,
    pub value_plain: FeatureMap,
    pub attended: FeatureMap,
    pub output: FeatureMap,
}

fn check_inputs(f_image: &FeatureMap, f_radar: &FeatureMap, params: &FusionParams) -> Result<()> {
    params.validate()?;
    f_image.check_spatial(f_radar, "fuse_bev")?;
    if f_image.c != params.channels || f_radar.c != params.channels {
        return Err(Error::DimensionMismatch(format!(
            "fusion configured for {} channels, got image {} / radar {}",
            params.channels, f_image.c, f_radar.c
        )));
    }
    Ok(())
}

/// Forward pass keeping every intermediate.
pub fn fuse_trace(f_image: &FeatureMap, f_radar: &FeatureMap, params: &FusionParams) -> Result<FuseTrace> {
    check_inputs(f_image, f_radar, params)?;
    let query = aggregate(f_image, f_radar, params)?;
    let confidence = confidence_map(f_image, &params.conf_mlp)?;
    let (image_weighted, radar_weighted) = weight_features(f_image, f_radar, &confidence)?;
    let value_weighted = concat_mm(&image_weighted, &radar_weighted, params)?;
    let value_plain = FeatureMap::concat(f_image, f_radar)?;
    let attended = deform_cross_attention(&query, &value_plain, &params.attn_plain)?
        .add(&deform_cross_attention(&query, &value_weighted, &params.attn_weighted)?);
    let output = conv3x3(&attended, &params.out_conv)?;
    Ok(FuseTrace {
        query,
        confidence,
        image_weighted,
        radar_weighted,
        value_weighted,
        value_plain,
        attended,
        output,
    })
}

/// `Conv(DCA(f_A, [f_I; f_p]) + DCA(f_A, f_mm))`, output `C × H × W`.
pub fn fuse_bev(f_image: &FeatureMap, f_radar: &FeatureMap, params: &FusionParams) -> Result<FeatureMap> {
    Ok(fuse_trace(f_image, f_radar, params)?.output)
}

/// Gradients of `fuse_bev` with respect to `(f_I, f_p)`.
pub fn fuse_bev_vjp(
    f_image: &FeatureMap,
    f_radar: &FeatureMap,
    params: &FusionParams,
    grad: &FeatureMap,
) -> Result<(FeatureMap, FeatureMap)> {
    let t = fuse_trace(f_image, f_radar, params)?;
    let g_att = conv3x3_vjp(&t.attended, &params.out_conv, grad)?;

    let (g_q1, g_plain) =
        deform_cross_attention_vjp(&t.query, &t.value_plain, &params.attn_plain, &g_att)?;
    let (g_q2, g_weighted) =
        deform_cross_attention_vjp(&t.query, &t.value_weighted, &params.attn_weighted, &g_att)?;
    let g_query = g_q1.add(&g_q2);

    let (mut g_image, mut g_radar) = aggregate_vjp(f_image, f_radar, params, &g_query)?;

    let (gi_plain, gp_plain) = g_plain.split(f_image.c);
    g_image = g_image.add(&gi_plain);
    g_radar = g_radar.add(&gp_plain);

    let (g_iw, g_rw) = concat_mm_vjp(&t.image_weighted, &t.radar_weighted, params, &g_weighted)?;
    let (gi_w, gp_w, g_conf) = weight_features_vjp(f_image, f_radar, &t.confidence, &g_iw, &g_rw)?;
    g_image = g_image.add(&gi_w);
    g_radar = g_radar.add(&gp_w);
    g_image = g_image.add(&confidence_map_vjp(f_image, &params.conf_mlp, &g_conf)?);

    Ok((g_image, g_radar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::params::{DEFAULT_HEADS, DEFAULT_POINTS};
    use crate::rng::Rng;

    fn random_map(c: usize, h: usize, w: usize, seed: u64) -> FeatureMap {
        let mut rng = Rng::new(seed, 0);
        FeatureMap::from_fn(c, h, w, |_, _, _| rng.standard_normal())
    }

    #[test]
    fn output_shape_matches_inputs() {
        let p = FusionParams::seeded(8, DEFAULT_HEADS, DEFAULT_POINTS, &mut Rng::new(1, 0));
        let out = fuse_bev(&random_map(8, 5, 6, 2), &random_map(8, 5, 6, 3), &p).unwrap();
        assert_eq!((out.c, out.h, out.w), (8, 5, 6));
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let p = FusionParams::seeded(8, DEFAULT_HEADS, DEFAULT_POINTS, &mut Rng::new(1, 0));
        assert!(fuse_bev(&random_map(4, 5, 5, 2), &random_map(4, 5, 5, 3), &p).is_err());
        assert!(fuse_bev(&random_map(8, 5, 5, 2), &random_map(8, 4, 5, 3), &p).is_err());
    }
}
