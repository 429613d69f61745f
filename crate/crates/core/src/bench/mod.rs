//! Synthetic robustness benchmark: seeded scenes, corruption sweeps,
//! Gaussian expansion and metric reports.

mod manifest;
mod metrics;
mod scene;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expand::{bev_project, gaussian_expansion, voxelize, ExponentMode, Heatmap, Projector, ProjectorWeights};
use crate::radar::{CorruptionKind, CorruptionSpec};
use crate::rng::{derive_seed, Rng};
use crate::types::{GridSpec, PointCloud, Scene};

pub use manifest::{gen_manifest, write_manifest, write_manifest_file, ManifestEntry, MANIFEST_HEADER, NOISY_TRAIN_CLEAN_RATIO};
pub use metrics::{
    emit_heatmap, metric_chamfer, metric_peak, metric_snr, quantize_heatmap, read_heatmap_levels,
    PeakComparison,
};
pub use scene::{gen_scene, scripted_scene, SceneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pipeline {
    #[serde(rename = "raw")]
    Raw,
    #[serde(rename = "3dge_planar")]
    ExpandPlanar,
    #[serde(rename = "3dge_isotropic")]
    ExpandIsotropic,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Raw => "raw",
            Pipeline::ExpandPlanar => "3dge_planar",
            Pipeline::ExpandIsotropic => "3dge_isotropic",
        }
    }

    fn mode(self) -> Option<ExponentMode> {
        match self {
            Pipeline::Raw => None,
            Pipeline::ExpandPlanar => Some(ExponentMode::PlanarXY),
            Pipeline::ExpandIsotropic => Some(ExponentMode::Isotropic3D),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectorConfig {
    /// RCS-percentile rule calibrated on each processed cloud.
    #[default]
    Heuristic,
    /// Learned projector loaded from a JSON weights file.
    WeightsFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub scene: SceneConfig,
    pub grid: GridSpec,
    pub corruptions: Vec<CorruptionSpec>,
    pub levels: BTreeMap<CorruptionKind, Vec<f64>>,
    pub pipelines: Vec<Pipeline>,
    pub projector: ProjectorConfig,
    pub replicates: usize,
    pub master_seed: u64,
}

impl Default for SweepConfig {
    /// C1 and C2 at σ ∈ {3, 5}, C3 at {10, 14} dropped beams, C4 at σ ∈ {3, 5};
    /// ten replicates through the raw and planar-expansion pipelines.
    fn default() -> Self {
        let kinds = [
            (CorruptionKind::SpuriousPoints, vec![3.0, 5.0]),
            (CorruptionKind::NonPositionalDisturbance, vec![3.0, 5.0]),
            (CorruptionKind::BeamDrop, vec![10.0, 14.0]),
            (CorruptionKind::PointShifting, vec![3.0, 5.0]),
        ];
        Self {
            scene: SceneConfig::default(),
            grid: GridSpec::default(),
            corruptions: kinds.iter().map(|(k, _)| CorruptionSpec::new(*k)).collect(),
            levels: kinds.into_iter().collect(),
            pipelines: vec![Pipeline::Raw, Pipeline::ExpandPlanar],
            projector: ProjectorConfig::Heuristic,
            replicates: 10,
            master_seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a JSON config; a relative weights path resolves against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let ProjectorConfig::WeightsFile(w) = &mut cfg.projector {
            if w.is_relative() {
                if let Some(dir) = path.parent() {
                    *w = dir.join(&*w);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate(&self.grid)?;
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.corruptions.is_empty() {
            return Err(Error::Config("corruption list is empty".into()));
        }
        if self.pipelines.is_empty() {
            return Err(Error::Config("pipeline list is empty".into()));
        }
        for spec in &self.corruptions {
            let levels = self.levels.get(&spec.kind).filter(|l| !l.is_empty()).ok_or_else(|| {
                Error::Config(format!("no levels given for {}", spec.kind))
            })?;
            for &level in levels {
                spec.with_level(level).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// `(corruption, level, replicate)` work items in declaration order.
    fn work_items(&self) -> Vec<(usize, f64, usize)> {
        let mut items = Vec::new();
        for (ci, spec) in self.corruptions.iter().enumerate() {
            for &level in &self.levels[&spec.kind] {
                for rep in 0..self.replicates {
                    items.push((ci, level, rep));
                }
            }
        }
        items
    }
}

/// Seed of one sweep row: a stable hash of master seed, kind, level and replicate.
pub fn row_seed(master: u64, kind: CorruptionKind, level: f64, replicate: usize) -> u64 {
    derive_seed(&[master, kind.id(), level.to_bits(), replicate as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub kind: CorruptionKind,
    pub level: f64,
    pub replicate: usize,
    pub pipeline: Pipeline,
    pub snr_before: f64,
    pub snr_after: f64,
    pub peak_consistent: bool,
    pub peak_l2_cells: f64,
    pub chamfer_m: f64,
    pub points_in: usize,
    pub points_out: usize,
    pub wall_ms: f64,
    /// Set when a sub-operation failed; metric fields are then NaN.
    pub error: Option<String>,
}

pub const REPORT_HEADER: [&str; 13] = [
    "kind",
    "level",
    "replicate",
    "pipeline",
    "snr_before",
    "snr_after",
    "peak_consistent",
    "peak_l2_cells",
    "chamfer_m",
    "points_in",
    "points_out",
    "wall_ms",
    "error",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub rows: Vec<ReportRow>,
}

impl BenchReport {
    /// Writes the CSV report. Wall times are machine-dependent, so the
    /// column stays empty unless `record_timing` is set.
    pub fn write_csv<W: Write>(&self, writer: W, record_timing: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::format("csv", e.to_string());
        w.write_record(REPORT_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            let fields = [
                r.kind.name().to_string(),
                r.level.to_string(),
                r.replicate.to_string(),
                r.pipeline.name().to_string(),
                r.snr_before.to_string(),
                r.snr_after.to_string(),
                r.peak_consistent.to_string(),
                r.peak_l2_cells.to_string(),
                r.chamfer_m.to_string(),
                r.points_in.to_string(),
                r.points_out.to_string(),
                if record_timing { format!("{:.3}", r.wall_ms) } else { String::new() },
                r.error.clone().unwrap_or_default(),
            ];
            w.write_record(&fields).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::format("csv", e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self, record_timing: bool) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, record_timing)?;
        String::from_utf8(buf).map_err(|e| Error::format("csv", e.to_string()))
    }

    /// Rows matching `kind`, `level` and `pipeline`.
    pub fn select(&self, kind: CorruptionKind, level: f64, pipeline: Pipeline) -> Vec<&ReportRow> {
        self.rows
            .iter()
            .filter(|r| r.kind == kind && r.level == level && r.pipeline == pipeline)
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; `0` uses the rayon default.
    pub jobs: usize,
    /// Keep the processed BEV map of every row.
    pub keep_heatmaps: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub report: BenchReport,
    /// Parallel to `report.rows` when heatmaps were requested.
    pub heatmaps: Vec<Option<Heatmap>>,
}

/// BEV map of `cloud` after `pipeline`.
pub fn process(
    cloud: &PointCloud,
    grid: &GridSpec,
    pipeline: Pipeline,
    projector: Option<&ProjectorWeights>,
) -> Result<Heatmap> {
    match pipeline.mode() {
        None => Ok(bev_project(&voxelize(cloud, grid).grid)),
        Some(mode) => {
            let projector = match projector {
                Some(w) => Projector::Learned(w.clone()),
                None => Projector::heuristic_for(cloud),
            };
            Ok(bev_project(&gaussian_expansion(cloud, grid, &projector, mode)?))
        }
    }
}

struct RowMetrics {
    snr_before: f64,
    snr_after: f64,
    peak: PeakComparison,
    chamfer_m: f64,
    heatmap: Heatmap,
}

fn row_metrics(
    scene: &Scene,
    corrupted: &PointCloud,
    grid: &GridSpec,
    pipeline: Pipeline,
    weights: Option<&ProjectorWeights>,
) -> Result<RowMetrics> {
    let raw = process(corrupted, grid, Pipeline::Raw, None)?;
    let after = process(corrupted, grid, pipeline, weights)?;
    let clean = process(&scene.cloud, grid, pipeline, weights)?;
    Ok(RowMetrics {
        snr_before: metric_snr(&raw, &scene.boxes, grid)?,
        snr_after: metric_snr(&after, &scene.boxes, grid)?,
        peak: metric_peak(&clean, &after)?,
        chamfer_m: metric_chamfer(&scene.cloud, corrupted)?,
        heatmap: after,
    })
}

/// Runs every `(corruption, level, replicate, pipeline)` combination. Rows
/// come back in declaration order whatever the thread count; a failing
/// sub-operation marks its rows instead of aborting the sweep.
pub fn run_sweep(cfg: &SweepConfig, opts: &SweepOptions) -> Result<SweepOutput> {
    cfg.validate()?;
    let weights = match &cfg.projector {
        ProjectorConfig::Heuristic => None,
        ProjectorConfig::WeightsFile(p) => Some(ProjectorWeights::load(p)?),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let items = cfg.work_items();
    let chunks: Vec<Vec<(ReportRow, Option<Heatmap>)>> = pool.install(|| {
        items
            .par_iter()
            .map(|&(ci, level, rep)| run_item(cfg, ci, level, rep, weights.as_ref(), opts.keep_heatmaps))
            .collect()
    });
    let mut out = SweepOutput::default();
    for (row, map) in chunks.into_iter().flatten() {
        out.report.rows.push(row);
        out.heatmaps.push(map);
    }
    Ok(out)
}

fn run_item(
    cfg: &SweepConfig,
    ci: usize,
    level: f64,
    rep: usize,
    weights: Option<&ProjectorWeights>,
    keep: bool,
) -> Vec<(ReportRow, Option<Heatmap>)> {
    let start = Instant::now();
    let spec = &cfg.corruptions[ci];
    let seed = row_seed(cfg.master_seed, spec.kind, level, rep);
    let prepared = gen_scene(&cfg.scene, &cfg.grid, &mut Rng::new(seed, 0))
        .and_then(|s| {
            let c = spec.with_level(level)?.with_seed(seed).apply(&s.cloud, &s.boxes, &cfg.grid)?;
            Ok((s, c))
        })
        .map_err(|e| e.to_string());
    let setup_ms = start.elapsed().as_secs_f64() * 1e3;
    cfg.pipelines
        .iter()
        .map(|&pipeline| {
            let t = Instant::now();
            let metrics = prepared.as_ref().map_err(Clone::clone).and_then(|(s, c)| {
                row_metrics(s, c, &cfg.grid, pipeline, weights).map_err(|e| e.to_string())
            });
            let wall_ms = setup_ms + t.elapsed().as_secs_f64() * 1e3;
            let (points_in, points_out) =
                prepared.as_ref().map_or((0, 0), |(s, c)| (s.cloud.len(), c.len()));
            let mut row = ReportRow {
                kind: spec.kind,
                level,
                replicate: rep,
                pipeline,
                snr_before: f64::NAN,
                snr_after: f64::NAN,
                peak_consistent: false,
                peak_l2_cells: f64::NAN,
                chamfer_m: f64::NAN,
                points_in,
                points_out,
                wall_ms,
                error: None,
            };
            match metrics {
                Ok(m) => {
                    row.snr_before = m.snr_before;
                    row.snr_after = m.snr_after;
                    row.peak_consistent = m.peak.consistent;
                    row.peak_l2_cells = m.peak.l2_cells;
                    row.chamfer_m = m.chamfer_m;
                    (row, keep.then_some(m.heatmap))
                }
                Err(e) => {
                    row.error = Some(e);
                    (row, None)
                }
            }
        })
        .collect()
}

/// File name used for a row's heatmap.
pub fn heatmap_file_name(row: &ReportRow) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{}_{}_r{:03}_{}.pgm",
        row.kind.name(),
        row.level,
        row.replicate,
        row.pipeline.name()
    );
    s
}

/// Writes `report.csv` (and, if kept, one PGM per row under `heatmaps/`)
/// into `out_dir`.
pub fn write_outputs(out: &SweepOutput, out_dir: &Path, record_timing: bool) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let report_path = out_dir.join("report.csv");
    let file = std::fs::File::create(&report_path).map_err(|e| Error::io(&report_path, e))?;
    out.report.write_csv(std::io::BufWriter::new(file), record_timing)?;
    if out.heatmaps.iter().any(Option::is_some) {
        let dir = out_dir.join("heatmaps");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (row, map) in out.report.rows.iter().zip(&out.heatmaps) {
            if let Some(map) = map {
                emit_heatmap(map, dir.join(heatmap_file_name(row)))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_kind(kind: CorruptionKind, level: f64) -> SweepConfig {
        SweepConfig {
            corruptions: vec![CorruptionSpec::new(kind)],
            levels: [(kind, vec![level])].into_iter().collect(),
            replicates: 1,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn default_config_levels() {
        let cfg = SweepConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.levels[&CorruptionKind::SpuriousPoints], vec![3.0, 5.0]);
        assert_eq!(cfg.levels[&CorruptionKind::NonPositionalDisturbance], vec![3.0, 5.0]);
        assert_eq!(cfg.levels[&CorruptionKind::BeamDrop], vec![10.0, 14.0]);
        assert_eq!(cfg.work_items().len(), 4 * 2 * 10);
    }

    #[test]
    fn one_combination_two_pipelines_two_rows() {
        let out = run_sweep(&one_kind(CorruptionKind::SpuriousPoints, 5.0), &SweepOptions::default())
            .unwrap();
        assert_eq!(out.report.rows.len(), 2);
        assert_eq!(out.report.rows[0].pipeline, Pipeline::Raw);
        assert_eq!(out.report.rows[1].pipeline, Pipeline::ExpandPlanar);
        assert!(out.report.rows.iter().all(|r| r.error.is_none()));
        assert_eq!(out.report.rows[0].snr_before, out.report.rows[0].snr_after);
    }

    #[test]
    fn failing_rows_are_marked() {
        // Dropping every beam leaves nothing to compare against.
        let out = run_sweep(&one_kind(CorruptionKind::BeamDrop, 32.0), &SweepOptions::default())
            .unwrap();
        assert_eq!(out.report.rows.len(), 2);
        assert!(out.report.rows.iter().all(|r| r.error.is_some()));
        let csv = out.report.to_csv_string(false).unwrap();
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn config_errors() {
        let mut cfg = SweepConfig::default();
        cfg.replicates = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = SweepConfig::default();
        cfg.levels.insert(CorruptionKind::BeamDrop, vec![]);
        assert!(cfg.validate().is_err());
        let mut cfg = SweepConfig::default();
        cfg.levels.insert(CorruptionKind::BeamDrop, vec![2.5]);
        assert!(cfg.validate().is_err());
        assert!(SweepConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn json_round_trip() {
        let cfg = SweepConfig {
            projector: ProjectorConfig::WeightsFile("w.json".into()),
            pipelines: vec![Pipeline::ExpandIsotropic],
            ..SweepConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"3dge_isotropic\""));
        assert!(text.contains("\"weights_file\""));
        assert_eq!(serde_json::from_str::<SweepConfig>(&text).unwrap(), cfg);
        let partial = SweepConfig::from_json(r#"{"replicates": 3, "projector": "heuristic"}"#).unwrap();
        assert_eq!(partial.replicates, 3);
        assert_eq!(partial.corruptions.len(), 4);
    }

    #[test]
    fn row_seeds_ignore_other_levels() {
        let a = row_seed(1, CorruptionKind::PointShifting, 5.0, 2);
        assert_eq!(a, row_seed(1, CorruptionKind::PointShifting, 5.0, 2));
        assert_ne!(a, row_seed(1, CorruptionKind::PointShifting, 3.0, 2));
        assert_ne!(a, row_seed(1, CorruptionKind::SpuriousPoints, 5.0, 2));
    }
}
