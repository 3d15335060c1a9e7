//! `spdh` command-line pipeline: synthesize, encode, decode, evaluate,
//! visualize and import depth datasets.

pub mod commands;
pub mod config;
pub mod viz;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::{StackFormat, SynthArgs};
use config::{InputShape, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "spdh", version, about = "SPDH robot pose pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand. Flags override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Camera intrinsics JSON.
    #[arg(long, global = true)]
    pub camera: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub z_min: Option<f64>,
    #[arg(long, global = true)]
    pub z_max: Option<f64>,
    #[arg(long, global = true)]
    pub delta_z: Option<f64>,
    #[arg(long, global = true)]
    pub sigma_m: Option<f64>,
    /// Heatmap size as HxW.
    #[arg(long, global = true)]
    pub shape: Option<InputShape>,
    /// Comma-separated mAP thresholds in mm.
    #[arg(long, global = true, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub peak_threshold: Option<f64>,
}

impl GlobalArgs {
    /// Config file (or defaults) with flag overrides applied, validated.
    pub fn effective_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(c) = &self.camera {
            cfg.camera = Some(c.clone());
        }
        if let Some(c) = &cfg.camera {
            cfg.camera = Some(std::path::absolute(c).with_context(|| format!("resolving {}", c.display()))?);
        }
        let spdh = &mut cfg.spdh;
        for (flag, field) in [
            (self.z_min, &mut spdh.z_min),
            (self.z_max, &mut spdh.z_max),
            (self.delta_z, &mut spdh.delta_z),
            (self.sigma_m, &mut spdh.sigma_m),
        ] {
            if let Some(v) = flag {
                *field = v;
            }
        }
        if let Some(s) = self.shape {
            cfg.input = s;
        }
        if let Some(t) = &self.thresholds {
            cfg.eval.thresholds_mm = t.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = self.peak_threshold {
            cfg.decode.peak_threshold = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render synthetic pick-and-place depth sequences.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Frames per sequence.
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        sequences: Option<usize>,
        /// Pick-and-place motions per sequence.
        #[arg(long)]
        motions: Option<usize>,
        /// Diameter of the camera jitter ball (mm).
        #[arg(long)]
        jitter_mm: Option<f64>,
        #[arg(long)]
        noise_mm: Option<f64>,
        #[arg(long)]
        dropout: Option<f64>,
    },
    /// Encode dataset annotations into heatmap stacks.
    Encode {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Apply random rigid augmentation before encoding.
        #[arg(long)]
        augment: bool,
        #[arg(long, value_enum, default_value_t = StackFormat::Raw)]
        format: StackFormat,
    },
    /// Decode stacks into 3D joint predictions.
    Decode {
        #[arg(long)]
        stacks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Take Z from this dataset's depth at the decoded 2D joints instead
        /// of from the uz maps.
        #[arg(long, value_name = "DATASET")]
        baseline: Option<PathBuf>,
        /// Sub-pixel refinement of the heatmap peaks.
        #[arg(long)]
        refine: bool,
        /// Use the 3x3 median depth for the baseline.
        #[arg(long)]
        median: bool,
    },
    /// Score prediction files against ground truth.
    Eval {
        /// Predictions JSONL; repeat to compare methods.
        #[arg(long = "pred", required = true)]
        preds: Vec<PathBuf>,
        /// Row names, in the order of `--pred`.
        #[arg(long = "name")]
        names: Vec<String>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Encoder targets file, for augmented stacks.
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Average mAP per frame instead of pooling all joints.
        #[arg(long)]
        per_frame_map: bool,
    },
    /// Render heatmaps, depth, XYZ channels and joint overlays as PNG.
    Viz {
        #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
        stacks: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Frame as SEQUENCE:FRAME_ID (default: the first).
        #[arg(long)]
        frame: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Import depth PNGs and a joint CSV as a dataset.
    Convert {
        #[arg(long)]
        depth_dir: PathBuf,
        #[arg(long)]
        joints_csv: PathBuf,
        #[arg(long, default_value = "seq_000")]
        sequence: String,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs a parsed command line. Returns the number of per-frame failures.
pub fn run(cli: Cli) -> Result<usize> {
    let mut cfg = cli.global.effective_config()?;
    if let Some(jobs) = cli.global.jobs {
        // Ignore the error if a pool already exists (tests run many commands
        // in one process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match cli.command {
        Command::Synth {
            out,
            frames,
            sequences,
            motions,
            jitter_mm,
            noise_mm,
            dropout,
        } => {
            SynthArgs {
                frames,
                sequences,
                motions,
                jitter_mm,
                noise_mm,
                dropout,
            }
            .apply(&mut cfg);
            cfg.validate()?;
            commands::synth(&cfg, &out)
        }
        Command::Encode {
            dataset,
            out,
            augment,
            format,
        } => commands::encode(&cfg, &dataset, &out, augment || cfg.augment.enabled, format),
        Command::Decode {
            stacks,
            out,
            baseline,
            refine,
            median,
        } => {
            if refine {
                cfg.decode.refinement = spdh::codec::Refinement::Quadratic;
            }
            if median {
                cfg.decode.baseline_sampling = spdh::metrics::DepthSampling::Median3x3;
            }
            commands::decode(&cfg, &stacks, &out, baseline.as_deref())
        }
        Command::Eval {
            preds,
            names,
            dataset,
            targets,
            out,
            per_frame_map,
        } => {
            if per_frame_map {
                cfg.eval.pooling = spdh::metrics::MapPooling::PerFrameMean;
            }
            let gt = commands::load_ground_truth(dataset.as_deref(), targets.as_deref())?;
            let (failures, table) = commands::eval(&cfg, &preds, &names, &gt, &out)?;
            print!("{table}");
            Ok(failures)
        }
        Command::Viz {
            stacks,
            dataset,
            frame,
            out,
        } => {
            let key = frame.as_deref().map(commands::parse_frame_key).transpose()?;
            match (stacks, dataset) {
                (Some(s), _) => commands::viz_stacks(&s, key.as_ref(), &out),
                (None, Some(d)) => commands::viz_dataset(&d, key.as_ref(), &out),
                (None, None) => anyhow::bail!("viz needs --stacks or --dataset"),
            }
        }
        Command::Convert {
            depth_dir,
            joints_csv,
            sequence,
            out,
        } => commands::convert(&cfg, &depth_dir, &joints_csv, &sequence, &out),
    }
}

/// Parses `args` (including the program name) and runs them.
pub fn run_args<I, T>(args: I) -> Result<usize>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run(Cli::try_parse_from(args)?)
}
