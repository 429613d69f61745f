//! Confidence-guided radar/camera fusion on BEV feature maps.
//!
//! The camera feature `f_I` drives a per-cell confidence `M_c` (a two-way
//! softmax). Two value maps are attended from a shared query `f_A`:
//!
//! * the plain concatenation `[f_I, f_p]`, and
//! * the confidence-weighted, layer-normalized `[LN(M_c f_I), LN((1 - M_c) f_p)]`.
//!
//! Both go through single-scale deformable cross-attention (8 heads, 2
//! sampling points), are summed, and pass through a 3×3 convolution.
//!
//! Every forward op has a matching `*_vjp` that returns the input gradients
//! for a given output cotangent. Tests check these against central finite
//! differences.

mod deform;
mod feature;
mod fuse;
mod ops;
mod params;

pub use deform::{
    bilinear_sample, deform_cross_attention, deform_cross_attention_vjp, sampling_locations,
};
pub use feature::{ConfidenceMap, FeatureMap};
pub use fuse::{fuse_bev, fuse_bev_vjp, fuse_trace, FuseTrace};
pub use ops::{
    aggregate, aggregate_vjp, concat_mm, concat_mm_vjp, confidence_map, confidence_map_vjp,
    conv3x3, conv3x3_vjp, layer_norm, layer_norm_vjp, weight_features, weight_features_vjp,
};
pub use params::{
    decode_params, encode_params, read_params, write_params, Affine, ConfidenceMlp, Conv3x3, DeformAttnParams, FusionParams,
    LayerNormParams, ParamFileHeader, CONF_HIDDEN, DEFAULT_HEADS, DEFAULT_POINTS, LN_EPS,
};
