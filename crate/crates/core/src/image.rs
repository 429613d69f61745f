//! Camera frame degradation: gamma low light and map-driven weather
//! compositing.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::netpbm::{read_pnm, write_pnm, Pnm};
use crate::rng::Rng;

/// Gamma band for mild low light.
pub const MILD_GAMMA: [f64; 2] = [1.0, 2.0];
/// Gamma band for heavy low light.
pub const HEAVY_GAMMA: [f64; 2] = [2.0, 3.0];

/// RGB frame with samples in `[0, 1]`, row-major, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImagePlane {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width * Self::CHANNELS {
            return Err(Error::DimensionMismatch(format!(
                "{height}x{width}x3 image with {} samples",
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("image samples must lie in [0, 1]".into()));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width * Self::CHANNELS])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn from_pnm(img: &Pnm) -> Result<Self> {
        if img.channels != 3 {
            return Err(Error::format("netpbm", "camera frames must be P6"));
        }
        Self::new(img.height, img.width, img.data.iter().map(|&b| f64::from(b) / 255.0).collect())
    }

    /// Rounds to the nearest 8-bit level.
    pub fn to_pnm(&self) -> Pnm {
        let data = self.data.iter().map(|v| (v * 255.0).round() as u8).collect();
        Pnm::new(self.width, self.height, 3, data).expect("dimensions are valid by construction")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_pnm(&read_pnm(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_pnm(path, &self.to_pnm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeatherKind {
    Rain,
    Snow,
    Fog,
}

impl WeatherKind {
    /// Atmosphere value the map blends toward.
    pub fn default_atmosphere(self) -> f64 {
        match self {
            WeatherKind::Rain => 0.6,
            WeatherKind::Snow | WeatherKind::Fog => 0.8,
        }
    }
}

/// Per-pixel degradation opacity in `[0, 1]`, one or three channels.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationMap {
    pub kind: WeatherKind,
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl DegradationMap {
    pub fn new(
        kind: WeatherKind,
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "degradation maps have 1 or 3 channels, got {channels}"
            )));
        }
        if height == 0 || width == 0 || data.len() != height * width * channels {
            return Err(Error::DimensionMismatch(format!(
                "{height}x{width}x{channels} map with {} samples",
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("map samples must lie in [0, 1]".into()));
        }
        Ok(Self {
            kind,
            height,
            width,
            channels,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Opacity applied to channel `c` of pixel `px`.
    fn at(&self, px: usize, c: usize) -> f64 {
        if self.channels == 1 {
            self.data[px]
        } else {
            self.data[px * 3 + c]
        }
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    pub fn read(kind: WeatherKind, path: impl AsRef<Path>) -> Result<Self> {
        let img = read_pnm(path)?;
        Self::new(
            kind,
            img.height,
            img.width,
            img.channels,
            img.data.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }
}

/// `img^gamma` per sample.
pub fn gamma_lowlight(img: &ImagePlane, gamma: f64) -> Result<ImagePlane> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let data = img.data.iter().map(|v| v.powf(gamma).clamp(0.0, 1.0)).collect();
    Ok(ImagePlane { data, ..img.clone() })
}

/// Alpha blend toward a constant atmosphere: `img * (1 - map) + atmosphere * map`.
pub fn composite_weather(
    img: &ImagePlane,
    map: &DegradationMap,
    atmosphere: f64,
) -> Result<ImagePlane> {
    if map.height != img.height || map.width != img.width {
        return Err(Error::DimensionMismatch(format!(
            "map {}x{} vs image {}x{}",
            map.height, map.width, img.height, img.width
        )));
    }
    if !(0.0..=1.0).contains(&atmosphere) {
        return Err(Error::InvalidArgument(format!(
            "atmosphere must lie in [0, 1], got {atmosphere}"
        )));
    }
    let data = img
        .data
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let a = map.at(i / 3, i % 3);
            (v * (1.0 - a) + atmosphere * a).clamp(0.0, 1.0)
        })
        .collect();
    Ok(ImagePlane { data, ..img.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Light,
    Heavy,
}

/// A camera degradation request: low light at a severity, or a weather kind.
/// Snow has a single level; its severity is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImageDegradation {
    LowLight(Severity),
    Weather(WeatherKind, Severity),
}

impl ImageDegradation {
    pub const ALL: [ImageDegradation; 7] = [
        ImageDegradation::LowLight(Severity::Light),
        ImageDegradation::LowLight(Severity::Heavy),
        ImageDegradation::Weather(WeatherKind::Rain, Severity::Light),
        ImageDegradation::Weather(WeatherKind::Rain, Severity::Heavy),
        ImageDegradation::Weather(WeatherKind::Snow, Severity::Heavy),
        ImageDegradation::Weather(WeatherKind::Fog, Severity::Light),
        ImageDegradation::Weather(WeatherKind::Fog, Severity::Heavy),
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ImageDegradation::LowLight(Severity::Light) => "lowlight_mild",
            ImageDegradation::LowLight(Severity::Heavy) => "lowlight_heavy",
            ImageDegradation::Weather(WeatherKind::Rain, Severity::Light) => "rain_light",
            ImageDegradation::Weather(WeatherKind::Rain, Severity::Heavy) => "rain_heavy",
            ImageDegradation::Weather(WeatherKind::Snow, _) => "snow",
            ImageDegradation::Weather(WeatherKind::Fog, Severity::Light) => "fog_light",
            ImageDegradation::Weather(WeatherKind::Fog, Severity::Heavy) => "fog_heavy",
        }
    }

    /// Draws the concrete parameters for one timestamp.
    pub fn sample(&self, rng: &mut Rng) -> SampledDegradation {
        match *self {
            ImageDegradation::LowLight(sev) => {
                let band = match sev {
                    Severity::Light => MILD_GAMMA,
                    Severity::Heavy => HEAVY_GAMMA,
                };
                SampledDegradation::LowLight {
                    gamma: rng.uniform(band[0], band[1]),
                }
            }
            ImageDegradation::Weather(kind, sev) => SampledDegradation::Weather {
                kind,
                opacity: match (kind, sev) {
                    (WeatherKind::Snow, _) | (_, Severity::Heavy) => 1.0,
                    (_, Severity::Light) => 0.5,
                },
                atmosphere: kind.default_atmosphere(),
            },
        }
    }
}

/// Parameters shared by every camera of one timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampledDegradation {
    LowLight { gamma: f64 },
    /// `opacity` scales the supplied map before blending.
    Weather { kind: WeatherKind, opacity: f64, atmosphere: f64 },
}

impl SampledDegradation {
    pub fn apply(&self, img: &ImagePlane, map: Option<&DegradationMap>) -> Result<ImagePlane> {
        match *self {
            SampledDegradation::LowLight { gamma } => gamma_lowlight(img, gamma),
            SampledDegradation::Weather {
                kind,
                opacity,
                atmosphere,
            } => {
                let map = map.ok_or_else(|| {
                    Error::InvalidArgument(format!("{kind:?} degradation needs a map"))
                })?;
                if map.kind != kind {
                    return Err(Error::InvalidArgument(format!(
                        "{:?} map supplied for {kind:?}",
                        map.kind
                    )));
                }
                composite_weather(img, &map.scaled(opacity), atmosphere)
            }
        }
    }
}

/// Degrades every camera frame of one timestamp with a single parameter draw.
/// Weather degradations need one map per frame.
pub fn same_timestamp_consistency(
    frames: &[ImagePlane],
    maps: Option<&[DegradationMap]>,
    degradation: ImageDegradation,
    rng: &mut Rng,
) -> Result<(Vec<ImagePlane>, SampledDegradation)> {
    if frames.is_empty() {
        return Err(Error::Empty("same_timestamp_consistency needs at least one frame"));
    }
    if let Some(m) = maps {
        if m.len() != frames.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} maps for {} frames",
                m.len(),
                frames.len()
            )));
        }
    }
    let sampled = degradation.sample(rng);
    let out = frames
        .iter()
        .enumerate()
        .map(|(i, f)| sampled.apply(f, maps.map(|m| &m[i])))
        .collect::<Result<Vec<_>>>()?;
    Ok((out, sampled))
}
