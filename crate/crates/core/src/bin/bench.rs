//! `bench`: synthetic radar robustness sweeps.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rcrobust::bench::{
    gen_manifest, gen_scene, run_sweep, write_manifest_file, write_outputs, SceneConfig, SweepConfig,
    SweepOptions, NOISY_TRAIN_CLEAN_RATIO,
};
use rcrobust::io::{read_boxes, read_cloud, write_boxes, write_cloud};
use rcrobust::radar::{CorruptionKind, CorruptionSpec, SpuriousMode};
use rcrobust::{Error, GridSpec, Rng};

#[derive(Parser)]
#[command(name = "bench", version, about = "Synthetic radar corruption and Gaussian expansion benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a corruption sweep and write report.csv into the output directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also write one PGM heatmap per row under heatmaps/.
        #[arg(long)]
        emit_heatmaps: bool,
        /// Fill the wall_ms column. Makes the report machine-dependent.
        #[arg(long)]
        record_timing: bool,
    },
    /// Generate a scene and write its points as CSV.
    GenScene {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the box annotations.
        #[arg(long)]
        boxes: Option<PathBuf>,
        /// Sweep config whose scene and grid sections to use.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Corrupt a point CSV.
    Corrupt {
        /// C1..C4 or a kind name (KeyPointMissing, SpuriousPoints, ...).
        #[arg(long)]
        kind: String,
        /// σ for Gaussian kinds, a count for removal kinds.
        #[arg(long)]
        level: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Box annotations, needed for in-box key-point removal.
        #[arg(long)]
        boxes: Option<PathBuf>,
        /// 1 removes key points inside boxes only.
        #[arg(long, default_value_t = 0)]
        gamma: u8,
        /// Scatter spurious points around random grid locations.
        #[arg(long)]
        random_spurious: bool,
    },
    /// Write a clean/noisy training-mix manifest.
    GenManifest {
        #[arg(long, default_value_t = NOISY_TRAIN_CLEAN_RATIO)]
        clean_ratio: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

fn config(e: Error) -> Failure {
    Failure::Config(e)
}

fn runtime(e: Error) -> Failure {
    Failure::Runtime(e)
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            config: path,
            out_dir,
            jobs,
            emit_heatmaps,
            record_timing,
        } => {
            let cfg = SweepConfig::load(&path).map_err(config)?;
            let opts = SweepOptions {
                jobs,
                keep_heatmaps: emit_heatmaps,
            };
            let out = run_sweep(&cfg, &opts).map_err(runtime)?;
            write_outputs(&out, &out_dir, record_timing).map_err(runtime)?;
            let failed = out.report.rows.iter().filter(|r| r.error.is_some()).count();
            eprintln!("{} rows written to {} ({failed} failed)", out.report.rows.len(), out_dir.display());
        }
        Command::GenScene {
            seed,
            out,
            boxes,
            config: path,
        } => {
            let (scene_cfg, grid) = match path {
                Some(p) => {
                    let cfg = SweepConfig::load(p).map_err(config)?;
                    (cfg.scene, cfg.grid)
                }
                None => (SceneConfig::default(), GridSpec::default()),
            };
            let scene = gen_scene(&scene_cfg, &grid, &mut Rng::new(seed, 0)).map_err(config)?;
            write_cloud(&out, &scene.cloud).map_err(runtime)?;
            if let Some(b) = boxes {
                write_boxes(b, &scene.cloud.frame_id, &scene.boxes).map_err(runtime)?;
            }
        }
        Command::Corrupt {
            kind,
            level,
            seed,
            input,
            out,
            boxes,
            gamma,
            random_spurious,
        } => {
            let kind: CorruptionKind = kind.parse().map_err(config)?;
            let mut spec = CorruptionSpec::new(kind);
            spec.gamma = gamma;
            if random_spurious {
                spec.mode = SpuriousMode::Random;
            }
            let spec = spec.with_level(level).map_err(config)?.with_seed(seed);
            let cloud = read_cloud(&input).map_err(runtime)?;
            let boxes = match boxes {
                Some(p) => read_boxes(p)
                    .map_err(runtime)?
                    .into_iter()
                    .filter(|(frame, _)| *frame == cloud.frame_id)
                    .map(|(_, b)| b)
                    .collect(),
                None => Vec::new(),
            };
            let corrupted = spec.apply(&cloud, &boxes, &GridSpec::default()).map_err(runtime)?;
            write_cloud(&out, &corrupted).map_err(runtime)?;
        }
        Command::GenManifest {
            clean_ratio,
            out,
            count,
            seed,
        } => {
            let entries = gen_manifest(count, clean_ratio, seed).map_err(config)?;
            write_manifest_file(&out, &entries).map_err(runtime)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("bench: configuration error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("bench: {e}");
            ExitCode::from(2)
        }
    }
}
