//! `froxpvs`: dataset generation, ground truth, training, inference,
//! evaluation and timing for froxel-space PVS estimation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "froxpvs", version, about = "Froxel-space potentially-visible-set estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every command. Flags override the `--config` file.
#[derive(Args, Debug, Default)]
struct Common {
    /// Grid dimensions, `N` or `NxMxK`.
    #[arg(long)]
    dims: Option<String>,
    /// Viewcell radius in metres.
    #[arg(long, allow_negative_numbers = true)]
    radius: Option<f64>,
    /// Camera field of view in degrees.
    #[arg(long, allow_negative_numbers = true)]
    fov: Option<f64>,
    /// Rotation margin in degrees.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Interleaving factor.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    supersample: Option<usize>,
    /// Oracle viewpoints per viewcell.
    #[arg(long)]
    viewpoints: Option<usize>,
    /// Base seed for scenes, initialisation and shuffling.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    lr: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Probability threshold for a visible froxel.
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    /// Enables the far-field pass beyond this view depth.
    #[arg(long, allow_negative_numbers = true)]
    threshold_distance: Option<f64>,
    /// Writes timings as 0 so that reruns give identical files.
    #[arg(long)]
    deterministic: bool,
    /// Plain-text `key=value` settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` setting; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output file or directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate geometry/ground-truth pairs and a manifest.
    GenDataset {
        /// Number of frames (default from the config).
        #[arg(long)]
        frames: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Ground-truth PVS for one scene and viewcell.
    Gt {
        /// Wavefront OBJ scene; otherwise a generated frame is used.
        #[arg(long, conflicts_with = "frame")]
        scene: Option<PathBuf>,
        /// Motion table for the OBJ scene (`name vx vy vz` per line).
        #[arg(long, requires = "scene")]
        motion: Option<PathBuf>,
        /// Viewcell center `x,y,z` for an OBJ scene.
        #[arg(long, requires = "scene")]
        center: Option<String>,
        /// Viewcell yaw in degrees for an OBJ scene.
        #[arg(long, requires = "scene", allow_negative_numbers = true)]
        yaw: Option<f64>,
        /// Index of the generated frame.
        #[arg(long)]
        frame: Option<usize>,
        /// Also write the geometry grid here.
        #[arg(long)]
        geometry_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train the estimator on a dataset.
    Train {
        /// Dataset manifest.
        #[arg(long)]
        dataset: PathBuf,
        /// Epoch log CSV (default: `<out>.log.csv`).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Predict PVS grids from geometry grids.
    Infer {
        #[arg(long)]
        model: PathBuf,
        /// Single geometry grid.
        #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
        geometry: Option<PathBuf>,
        /// Every frame of a dataset manifest; `--out` is then a directory.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare predictions with ground truth and write a metrics CSV.
    Eval {
        /// Predicted grid (with `--gt`).
        #[arg(long, requires = "gt", conflicts_with_all = ["model", "dataset"])]
        pred: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Model to evaluate on a dataset.
        #[arg(long, requires = "dataset")]
        model: Option<PathBuf>,
        /// Dataset manifest.
        #[arg(long, requires = "model")]
        dataset: Option<PathBuf>,
        /// Frame range `a..b` of the dataset.
        #[arg(long)]
        range: Option<String>,
        /// Skip the renders behind the pixel error rate.
        #[arg(long)]
        no_per: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Time froxelize, interleave, forward and deinterleave on one frame.
    Bench {
        /// Checkpoint; a freshly initialised model otherwise.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Generated frame to time.
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[command(flatten)]
        common: Common,
    },
}

/// Failure categories and their exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io(String),
    Invalid(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Io(_) => 2,
            Failure::Invalid(_) => 3,
        }
    }
}

impl From<froxpvs::PvsError> for Failure {
    fn from(e: froxpvs::PvsError) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Io(m) => write!(f, "I/O error: {m}"),
            Failure::Invalid(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = RunConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        let mut flags: Vec<(&str, String)> = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                flags.push((k, v));
            }
        };
        put("dims", self.dims.clone());
        put("radius", self.radius.map(|v| v.to_string()));
        put("fov", self.fov.map(|v| v.to_string()));
        put("beta", self.beta.map(|v| v.to_string()));
        put("d", self.d.map(|v| v.to_string()));
        put("supersample", self.supersample.map(|v| v.to_string()));
        put("viewpoints", self.viewpoints.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("train_seed", self.seed.map(|v| v.to_string()));
        put("epochs", self.epochs.map(|v| v.to_string()));
        put("lr", self.lr.map(|v| v.to_string()));
        put("alpha", self.alpha.map(|v| v.to_string()));
        put("lambda", self.lambda.map(|v| v.to_string()));
        put("tau", self.tau.map(|v| v.to_string()));
        put("threshold_distance", self.threshold_distance.map(|v| v.to_string()));
        put("deterministic", self.deterministic.then(|| "true".to_string()));
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(&k.trim().replace('-', "_"), v)?;
        }
        for (k, v) in flags {
            cfg.set(k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out(&self) -> Result<PathBuf, Failure> {
        self.out.clone().ok_or_else(|| Failure::Usage("--out is required".into()))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenDataset { frames, common } => {
            let mut cfg = common.resolve()?;
            if let Some(n) = frames {
                cfg.frames = n;
            }
            commands::gen_dataset(&cfg, &common.out()?)
        }
        Command::Gt {
            scene,
            motion,
            center,
            yaw,
            frame,
            geometry_out,
            common,
        } => {
            let cfg = common.resolve()?;
            let source = match scene {
                Some(path) => commands::SceneSource::Obj {
                    path,
                    motion,
                    center: center.as_deref().map(commands::parse_vec3).transpose()?.unwrap_or_default(),
                    yaw: yaw.unwrap_or(0.0),
                },
                None => commands::SceneSource::Frame(frame.unwrap_or(0)),
            };
            commands::gt(&cfg, &source, &common.out()?, geometry_out.as_deref())
        }
        Command::Train {
            dataset,
            log,
            resume,
            common,
        } => {
            let cfg = common.resolve()?;
            let out = common.out()?;
            let log = log.unwrap_or_else(|| commands::with_suffix(&out, ".log.csv"));
            commands::train(&cfg, &dataset, &out, &log, resume.as_deref())
        }
        Command::Infer {
            model,
            geometry,
            dataset,
            common,
        } => {
            let cfg = common.resolve()?;
            commands::infer(&cfg, &model, geometry.as_deref(), dataset.as_deref(), &common.out()?)
        }
        Command::Eval {
            pred,
            gt,
            model,
            dataset,
            range,
            no_per,
            common,
        } => {
            let cfg = common.resolve()?;
            let out = common.out()?;
            match (pred, gt, model, dataset) {
                (Some(p), Some(g), None, None) => commands::eval_grids(&cfg, &p, &g, &out),
                (None, _, Some(m), Some(d)) => {
                    let range = range.as_deref().map(commands::parse_range).transpose()?;
                    commands::eval_dataset(&cfg, &m, &d, range, !no_per, &out)
                }
                _ => Err(Failure::Usage("eval needs --pred and --gt, or --model and --dataset".into())),
            }
        }
        Command::Bench { model, frame, common } => {
            let cfg = common.resolve()?;
            commands::bench(&cfg, model.as_deref(), frame, common.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("froxpvs: {f}");
            ExitCode::from(f.code())
        }
    }
}
