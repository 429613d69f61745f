//! Radar point-cloud corruptions: key-point missing, spurious points, point
//! shifting, non-positional disturbance and azimuthal beam dropping.
//!
//! All operations are pure: they take the clean cloud by reference and return
//! a new cloud, drawing every random number from the supplied [`Rng`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::types::{BoxAnnotation, GridSpec, PointCloud, RadarPoint};

/// Bounds of the random corruption strength.
pub const SIGMA_RANGE: [f64; 2] = [1.0, 50.0];
/// Upper bound on `k` for selective (in-box) removal.
pub const MAX_IN_BOX_REMOVAL: usize = 8;
pub const DEFAULT_TOTAL_BEAMS: usize = 32;
pub const DEFAULT_SPURIOUS_RATIO: f64 = 0.2;
/// Rng streams used by [`CorruptionSpec::apply`] start here, clear of the
/// low streams used for scene generation.
pub const CORRUPTION_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CorruptionKind {
    KeyPointMissing,
    SpuriousPoints,
    PointShifting,
    NonPositionalDisturbance,
    BeamDrop,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 5] = [
        CorruptionKind::KeyPointMissing,
        CorruptionKind::SpuriousPoints,
        CorruptionKind::PointShifting,
        CorruptionKind::NonPositionalDisturbance,
        CorruptionKind::BeamDrop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::KeyPointMissing => "KeyPointMissing",
            CorruptionKind::SpuriousPoints => "SpuriousPoints",
            CorruptionKind::PointShifting => "PointShifting",
            CorruptionKind::NonPositionalDisturbance => "NonPositionalDisturbance",
            CorruptionKind::BeamDrop => "BeamDrop",
        }
    }

    /// Benchmark label. Key-point missing is measured in dropped beams, so
    /// both removal kinds report as C3.
    pub fn label(self) -> &'static str {
        match self {
            CorruptionKind::SpuriousPoints => "C1",
            CorruptionKind::NonPositionalDisturbance => "C2",
            CorruptionKind::KeyPointMissing | CorruptionKind::BeamDrop => "C3",
            CorruptionKind::PointShifting => "C4",
        }
    }

    /// Stable numeric id used in seed derivation.
    pub fn id(self) -> u64 {
        match self {
            CorruptionKind::KeyPointMissing => 0,
            CorruptionKind::SpuriousPoints => 1,
            CorruptionKind::PointShifting => 2,
            CorruptionKind::NonPositionalDisturbance => 3,
            CorruptionKind::BeamDrop => 4,
        }
    }

    /// Whether the level of this kind is a Gaussian spread (as opposed to a
    /// count of removed points or beams).
    pub fn level_is_sigma(self) -> bool {
        matches!(
            self,
            CorruptionKind::SpuriousPoints
                | CorruptionKind::PointShifting
                | CorruptionKind::NonPositionalDisturbance
        )
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    /// Accepts the variant name (case-insensitive) or a C1..C4 label. `C3`
    /// resolves to beam dropping.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let kind = match lower.as_str() {
            "c1" | "spuriouspoints" | "spurious" => CorruptionKind::SpuriousPoints,
            "c2" | "nonpositionaldisturbance" | "nonpositional" => {
                CorruptionKind::NonPositionalDisturbance
            }
            "c3" | "beamdrop" | "beams" => CorruptionKind::BeamDrop,
            "c4" | "pointshifting" | "pointshift" | "shift" => CorruptionKind::PointShifting,
            "keypointmissing" | "missing" => CorruptionKind::KeyPointMissing,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown corruption kind {s:?}"
                )))
            }
        };
        Ok(kind)
    }
}

/// Where spurious points are centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SpuriousMode {
    /// Around a uniformly chosen existing point.
    #[default]
    PointRelated,
    /// Around a location drawn uniformly over the grid bounds.
    Random,
}

/// Declarative corruption. Only the fields relevant to `kind` are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    #[serde(default)]
    pub gamma: u8,
    #[serde(default)]
    pub mode: SpuriousMode,
    /// Drawn from `U(1, 50)` when absent.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default = "default_drop_count")]
    pub drop_count: usize,
    #[serde(default = "default_spurious_ratio")]
    pub spurious_ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_drop_count() -> usize {
    1
}

fn default_spurious_ratio() -> f64 {
    DEFAULT_SPURIOUS_RATIO
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind) -> Self {
        Self {
            kind,
            gamma: 0,
            mode: SpuriousMode::default(),
            sigma: None,
            drop_count: default_drop_count(),
            spurious_ratio: DEFAULT_SPURIOUS_RATIO,
            seed: 0,
        }
    }

    /// Copy with the kind's severity set to `level`: σ for the Gaussian kinds,
    /// the removal count otherwise.
    pub fn with_level(&self, level: f64) -> Result<Self> {
        let mut out = self.clone();
        if self.kind.level_is_sigma() {
            if !(level.is_finite() && level > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{} level must be a positive sigma, got {level}",
                    self.kind
                )));
            }
            out.sigma = Some(level);
        } else {
            if !(level >= 0.0 && level.fract() == 0.0 && level.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{} level must be a non-negative integer count, got {level}",
                    self.kind
                )));
            }
            out.drop_count = level as usize;
        }
        Ok(out)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Applies the corruption with a generator seeded from `self.seed`.
    pub fn apply(
        &self,
        cloud: &PointCloud,
        boxes: &[BoxAnnotation],
        bounds: &GridSpec,
    ) -> Result<PointCloud> {
        let mut rng = Rng::new(self.seed, CORRUPTION_STREAM_BASE + self.kind.id());
        self.apply_with(cloud, boxes, bounds, &mut rng)
    }

    pub fn apply_with(
        &self,
        cloud: &PointCloud,
        boxes: &[BoxAnnotation],
        bounds: &GridSpec,
        rng: &mut Rng,
    ) -> Result<PointCloud> {
        let sigma = match self.sigma {
            Some(s) => s,
            None if self.kind.level_is_sigma() => sample_sigma(rng),
            None => 0.0,
        };
        match self.kind {
            CorruptionKind::KeyPointMissing => {
                key_point_missing(cloud, boxes, self.gamma, self.drop_count, rng)
            }
            CorruptionKind::SpuriousPoints => {
                spurious_points(cloud, self.mode, self.spurious_ratio, sigma, bounds, rng)
            }
            CorruptionKind::PointShifting => point_shift(cloud, sigma, rng),
            CorruptionKind::NonPositionalDisturbance => {
                non_positional_disturbance(cloud, sigma, rng)
            }
            CorruptionKind::BeamDrop => beam_drop(cloud, DEFAULT_TOTAL_BEAMS, self.drop_count, rng),
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "sigma must be positive and finite, got {sigma}"
        )))
    }
}

/// Corruption strength drawn from `U(1, 50)`.
pub fn sample_sigma(rng: &mut Rng) -> f64 {
    rng.uniform(SIGMA_RANGE[0], SIGMA_RANGE[1])
}

/// Removes `k` points, either from the whole cloud (`gamma = 0`, `k <=
/// floor(n/2)`) or from points inside any box (`gamma = 1`, `k <= 8`; fewer
/// are removed if fewer lie in boxes). Survivors keep their order.
pub fn key_point_missing(
    cloud: &PointCloud,
    boxes: &[BoxAnnotation],
    gamma: u8,
    k: usize,
    rng: &mut Rng,
) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::Empty("key_point_missing requires a non-empty cloud"));
    }
    let max_k = match gamma {
        0 => cloud.len() / 2,
        1 => MAX_IN_BOX_REMOVAL,
        g => {
            return Err(Error::InvalidArgument(format!(
                "gamma must be 0 or 1, got {g}"
            )))
        }
    };
    if k < 1 || k > max_k {
        return Err(Error::Precondition(format!(
            "k = {k} outside [1, {max_k}] for gamma = {gamma}"
        )));
    }

    let eligible: Vec<usize> = if gamma == 0 {
        (0..cloud.len()).collect()
    } else {
        cloud
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| boxes.iter().any(|b| b.contains(p)))
            .map(|(i, _)| i)
            .collect()
    };

    let mut removed = vec![false; cloud.len()];
    for slot in rng.choose_without_replacement(eligible.len(), k) {
        removed[eligible[slot]] = true;
    }
    let points = cloud
        .points
        .iter()
        .zip(&removed)
        .filter(|(_, &r)| !r)
        .map(|(p, _)| *p)
        .collect();
    Ok(cloud.with_points(points))
}

/// Number of points `spurious_points` appends to a cloud of `n` points.
pub fn spurious_count(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).round() as usize).max(1)
}

fn min_max(values: impl Iterator<Item = f64>) -> [f64; 2] {
    values.fold([f64::INFINITY, f64::NEG_INFINITY], |[lo, hi], v| {
        [lo.min(v), hi.max(v)]
    })
}

/// Appends `max(1, round(ratio * n))` Gaussian points. Point-related centers
/// are existing points; random centers are uniform over `bounds` (positions)
/// and over the cloud's observed RCS/velocity range. Random-mode positions are
/// clamped back into `bounds` after the perturbation.
pub fn spurious_points(
    cloud: &PointCloud,
    mode: SpuriousMode,
    spurious_ratio: f64,
    sigma: f64,
    bounds: &GridSpec,
    rng: &mut Rng,
) -> Result<PointCloud> {
    check_sigma(sigma)?;
    if !(spurious_ratio > 0.0 && spurious_ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "spurious_ratio must lie in (0, 1], got {spurious_ratio}"
        )));
    }
    if mode == SpuriousMode::PointRelated && cloud.is_empty() {
        return Err(Error::Empty("point-related spurious points need a non-empty cloud"));
    }
    bounds.validate()?;

    let m = spurious_count(cloud.len(), spurious_ratio);
    let ranges = bounds.ranges();
    let (rcs_range, v_range) = if cloud.is_empty() {
        ([0.0, 0.0], [0.0, 0.0])
    } else {
        (
            min_max(cloud.points.iter().map(|p| p.rcs)),
            min_max(cloud.points.iter().map(|p| p.v)),
        )
    };

    let mut points = Vec::with_capacity(cloud.len() + m);
    points.extend_from_slice(&cloud.points);
    for _ in 0..m {
        let base = match mode {
            SpuriousMode::PointRelated => cloud.points[rng.index(cloud.len())].as_array(),
            SpuriousMode::Random => [
                rng.uniform(ranges[0][0], ranges[0][1]),
                rng.uniform(ranges[1][0], ranges[1][1]),
                rng.uniform(ranges[2][0], ranges[2][1]),
                rng.uniform(rcs_range[0], rcs_range[1]),
                rng.uniform(v_range[0], v_range[1]),
            ],
        };
        let mut p = base.map(|b| b + sigma * rng.standard_normal());
        if mode == SpuriousMode::Random {
            for axis in 0..3 {
                p[axis] = p[axis].clamp(ranges[axis][0], ranges[axis][1]);
            }
        }
        points.push(RadarPoint::from_array(p));
    }
    Ok(cloud.with_points(points))
}

/// Adds independent `N(0, sigma^2)` offsets to x, y and z. RCS and velocity
/// are untouched.
pub fn point_shift(cloud: &PointCloud, sigma: f64, rng: &mut Rng) -> Result<PointCloud> {
    check_sigma(sigma)?;
    let points = cloud
        .points
        .iter()
        .map(|p| RadarPoint {
            x: p.x + sigma * rng.standard_normal(),
            y: p.y + sigma * rng.standard_normal(),
            z: p.z + sigma * rng.standard_normal(),
            ..*p
        })
        .collect();
    Ok(cloud.with_points(points))
}

/// Adds independent `N(0, sigma^2)` noise to RCS and velocity only.
pub fn non_positional_disturbance(
    cloud: &PointCloud,
    sigma: f64,
    rng: &mut Rng,
) -> Result<PointCloud> {
    check_sigma(sigma)?;
    let points = cloud
        .points
        .iter()
        .map(|p| RadarPoint {
            rcs: p.rcs + sigma * rng.standard_normal(),
            v: p.v + sigma * rng.standard_normal(),
            ..*p
        })
        .collect();
    Ok(cloud.with_points(points))
}

/// Azimuth sector of `(x, y)` among `total_beams` equal sectors of `[-pi, pi)`.
pub fn beam_of(x: f64, y: f64, total_beams: usize) -> usize {
    let theta = y.atan2(x);
    let b = ((theta + PI) / (2.0 * PI) * total_beams as f64).floor() as usize;
    // atan2 returns +pi on the negative x axis, which wraps to the first sector.
    if b >= total_beams {
        0
    } else {
        b
    }
}

/// Drops every point whose azimuth falls in one of `drop_count` randomly
/// chosen sectors out of `total_beams`.
pub fn beam_drop(
    cloud: &PointCloud,
    total_beams: usize,
    drop_count: usize,
    rng: &mut Rng,
) -> Result<PointCloud> {
    if total_beams == 0 {
        return Err(Error::InvalidArgument("total_beams must be positive".into()));
    }
    if drop_count > total_beams {
        return Err(Error::Precondition(format!(
            "cannot drop {drop_count} of {total_beams} beams"
        )));
    }
    let mut dropped = vec![false; total_beams];
    for b in rng.choose_without_replacement(total_beams, drop_count) {
        dropped[b] = true;
    }
    let points = cloud
        .points
        .iter()
        .filter(|p| !dropped[beam_of(p.x, p.y, total_beams)])
        .copied()
        .collect();
    Ok(cloud.with_points(points))
}
