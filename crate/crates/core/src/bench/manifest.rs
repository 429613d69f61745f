//! Noisy-training-mix manifests: which scenes stay clean and which get a
//! random radar corruption plus a random image degradation.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageDegradation;
use crate::radar::{sample_sigma, CorruptionKind, DEFAULT_TOTAL_BEAMS};
use crate::rng::{derive_seed, Rng};

/// Fraction of clean samples in the noisy training mix (8:2).
pub const NOISY_TRAIN_CLEAN_RATIO: f64 = 0.8;

const NOISY_KINDS: [CorruptionKind; 4] = [
    CorruptionKind::SpuriousPoints,
    CorruptionKind::NonPositionalDisturbance,
    CorruptionKind::BeamDrop,
    CorruptionKind::PointShifting,
];

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub index: usize,
    pub scene_seed: u64,
    /// `None` for clean samples.
    pub radar: Option<(CorruptionKind, f64)>,
    pub image: Option<ImageDegradation>,
}

impl ManifestEntry {
    pub fn is_clean(&self) -> bool {
        self.radar.is_none()
    }
}

pub const MANIFEST_HEADER: [&str; 6] =
    ["index", "scene_seed", "clean", "radar_kind", "radar_level", "image_degradation"];

/// `count` entries of which exactly `round(count · (1 − clean_ratio))` are
/// noisy, at positions drawn without replacement. Noisy entries pick one
/// of the four sweep kinds, a level (σ from `U(1, 50)` or 1 to 16 of 32
/// beams) and one of the image degradations.
pub fn gen_manifest(count: usize, clean_ratio: f64, seed: u64) -> Result<Vec<ManifestEntry>> {
    if !(0.0..=1.0).contains(&clean_ratio) {
        return Err(Error::InvalidArgument(format!(
            "clean ratio must lie in [0, 1], got {clean_ratio}"
        )));
    }
    let noisy = ((count as f64) * (1.0 - clean_ratio)).round() as usize;
    let mut rng = Rng::new(seed, 0);
    let mut is_noisy = vec![false; count];
    for i in rng.choose_without_replacement(count, noisy.min(count)) {
        is_noisy[i] = true;
    }
    let entries = is_noisy
        .into_iter()
        .enumerate()
        .map(|(index, noisy)| {
            let (radar, image) = if noisy {
                let kind = NOISY_KINDS[rng.index(NOISY_KINDS.len())];
                let level = if kind.level_is_sigma() {
                    sample_sigma(&mut rng)
                } else {
                    (1 + rng.index(DEFAULT_TOTAL_BEAMS / 2)) as f64
                };
                let image = ImageDegradation::ALL[rng.index(ImageDegradation::ALL.len())];
                (Some((kind, level)), Some(image))
            } else {
                (None, None)
            };
            ManifestEntry {
                index,
                scene_seed: derive_seed(&[seed, index as u64]),
                radar,
                image,
            }
        })
        .collect();
    Ok(entries)
}

pub fn write_manifest<W: Write>(writer: W, entries: &[ManifestEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::format("csv", e.to_string());
    w.write_record(MANIFEST_HEADER).map_err(csv_err)?;
    for e in entries {
        let (kind, level) = match e.radar {
            Some((k, l)) => (k.name().to_string(), l.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            e.index.to_string(),
            e.scene_seed.to_string(),
            e.is_clean().to_string(),
            kind,
            level,
            e.image.map(|d| d.name().to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::format("csv", e.to_string()))?;
    Ok(())
}

pub fn write_manifest_file(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_manifest(std::io::BufWriter::new(file), entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_noisy_count() {
        for (count, expect) in [(100, 20), (10, 2), (7, 1), (0, 0), (3, 1)] {
            let m = gen_manifest(count, 0.8, 5).unwrap();
            assert_eq!(m.len(), count);
            assert_eq!(m.iter().filter(|e| !e.is_clean()).count(), expect, "count {count}");
        }
    }

    #[test]
    fn noisy_entries_are_complete() {
        let m = gen_manifest(200, 0.5, 1).unwrap();
        for e in m.iter().filter(|e| !e.is_clean()) {
            let (kind, level) = e.radar.unwrap();
            assert!(e.image.is_some());
            if kind.level_is_sigma() {
                assert!((1.0..=50.0).contains(&level));
            } else {
                assert!(level >= 1.0 && level <= 16.0 && level.fract() == 0.0);
            }
        }
        assert_eq!(m, gen_manifest(200, 0.5, 1).unwrap());
    }

    #[test]
    fn bad_ratio() {
        assert!(gen_manifest(10, 1.5, 0).is_err());
        assert!(gen_manifest(10, -0.1, 0).is_err());
    }
}
