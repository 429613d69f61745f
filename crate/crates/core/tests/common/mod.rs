//! Shared test oracles. Kept independent of the code paths they check.
#![allow(dead_code)]

pub mod gradients;

use rcrobust::fusion::FeatureMap;
use rcrobust::Rng;

pub fn random_map(c: usize, h: usize, w: usize, rng: &mut Rng) -> FeatureMap {
    FeatureMap::from_fn(c, h, w, |_, _, _| rng.standard_normal())
}

/// Result of one directional derivative probe.
#[derive(Debug, Clone, Copy)]
pub struct Probe {
    pub finite_difference: f64,
    pub analytic: f64,
}

impl Probe {
    pub fn relative_error(&self) -> f64 {
        let scale = self.finite_difference.abs().max(self.analytic.abs()).max(1e-8);
        (self.finite_difference - self.analytic).abs() / scale
    }
}

/// Compares `wᵀ J u` from central differences of `forward` against
/// `(Jᵀ w) · u` from `vjp`, for `probes` random pairs `(u, w)`.
pub fn directional_probes(
    inputs: &[FeatureMap],
    forward: &dyn Fn(&[FeatureMap]) -> Vec<f64>,
    vjp: &dyn Fn(&[FeatureMap], &[f64]) -> Vec<FeatureMap>,
    probes: usize,
    h: f64,
    rng: &mut Rng,
) -> Vec<Probe> {
    let out_len = forward(inputs).len();
    (0..probes)
        .map(|_| {
            let dirs: Vec<FeatureMap> = inputs
                .iter()
                .map(|f| random_map(f.c, f.h, f.w, rng))
                .collect();
            let cot: Vec<f64> = (0..out_len).map(|_| rng.standard_normal()).collect();
            let shifted = |s: f64| -> Vec<FeatureMap> {
                inputs.iter().zip(&dirs).map(|(x, u)| x.axpy(s, u)).collect()
            };
            let plus = forward(&shifted(h));
            let minus = forward(&shifted(-h));
            let finite_difference = plus
                .iter()
                .zip(&minus)
                .zip(&cot)
                .map(|((p, m), w)| w * (p - m) / (2.0 * h))
                .sum();
            let analytic = vjp(inputs, &cot)
                .iter()
                .zip(&dirs)
                .map(|(g, u)| g.dot(u))
                .sum();
            Probe {
                finite_difference,
                analytic,
            }
        })
        .collect()
}

pub fn worst(probes: &[Probe]) -> f64 {
    assert!(
        probes.iter().all(|p| p.analytic.abs() > 1e-6),
        "degenerate probe with vanishing derivative: {probes:?}"
    );
    probes.iter().map(Probe::relative_error).fold(0.0, f64::max)
}

/// Distance of the closest sampling coordinate to a bilinear kink (integer
/// lattice lines, which include the clamp borders).
pub fn kink_margin(locs: &[(f64, f64)]) -> f64 {
    locs.iter()
        .flat_map(|&(x, y)| [x, y])
        .map(|v| (v - v.round()).abs())
        .fold(f64::INFINITY, f64::min)
}
