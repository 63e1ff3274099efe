//! `splatseg` command-line tool.
//!
//! JSON results go to stdout, a one-line summary to stderr. Exit codes:
//! 0 success, 1 usage, 2 I/O, 3 invalid data, config or contract.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use splatseg::config::PipelineConfig;
use splatseg::Error;

#[derive(Debug, Parser)]
#[command(
    name = "splatseg",
    version,
    about = "Instance labels for 3D Gaussian scenes from multi-view masks"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SPLATSEG_THREADS")]
    threads: Option<usize>,
    /// JSON file with `raster`, `aggregation` and `refine` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config field, e.g. `--set refine.passes=3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Suppress the stderr summary.
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Render,
    Centroid,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MatchingArg {
    Identity,
    Hungarian,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Aggregate per-view masks into per-Gaussian instance labels.
    Label {
        scene: PathBuf,
        cameras: PathBuf,
        /// Directory holding `mask_{id}.pgm` (or `.png`) per camera.
        masks: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        min_votes: Option<u64>,
        /// Record the current time in the PLY provenance. Without it the
        /// timestamp comes from SOURCE_DATE_EPOCH, if set.
        #[arg(long)]
        timestamp: bool,
    },
    /// Render instance masks from a labeled scene for any cameras.
    RenderMask {
        scene: PathBuf,
        cameras: PathBuf,
        out_dir: PathBuf,
        /// Also write `refined_{id}.pgm`.
        #[arg(long)]
        refine: bool,
    },
    /// Refine a mask file, or every mask in a directory.
    Refine { input: PathBuf, output: PathBuf },
    /// Score predicted masks against ground-truth masks with the same camera ids.
    Eval {
        pred_dir: PathBuf,
        gt_dir: PathBuf,
        /// File-name prefix of predicted masks (`mask_`, `coarse_`, `refined_`).
        #[arg(long, default_value = "mask_")]
        pred_prefix: String,
        #[arg(long, value_enum, default_value = "identity")]
        matching: MatchingArg,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Time aggregation, rendering and refinement.
    Bench {
        scene: PathBuf,
        cameras: PathBuf,
        masks: PathBuf,
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
    /// Label agreement and aggregation time against the number of views.
    Robust {
        scene: PathBuf,
        cameras: PathBuf,
        masks: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "24,12,6,3,1")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compare rendered and refined masks against the input masks per view.
    Stage {
        scene: PathBuf,
        cameras: PathBuf,
        masks: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write a synthetic scene, its ground truth, cameras and masks.
    Synth {
        /// Scene spec JSON; the bundled standard fixture when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Mask corruption, e.g. `{"kind":"dropout","p":0.3}`.
        #[arg(long)]
        corrupt: Option<String>,
        #[arg(long, default_value_t = 0)]
        corrupt_seed: u64,
    },
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_io() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

pub struct Context {
    pub config: PipelineConfig,
    pub quiet: bool,
}

impl Context {
    pub fn summary(&self, line: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", line.as_ref());
        }
    }
}

fn setup(global: &GlobalArgs) -> Result<Context, Failure> {
    if let Some(n) = global.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
    }
    let mut config = match &global.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    for o in &global.overrides {
        config.apply_override(o)?;
    }
    Ok(Context {
        config,
        quiet: global.quiet,
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut ctx = setup(&cli.global)?;
    match cli.command {
        Command::Label {
            scene,
            cameras,
            masks,
            output,
            mode,
            min_votes,
            timestamp,
        } => {
            if let Some(m) = mode {
                ctx.config.aggregation.mode = match m {
                    ModeArg::Render => splatseg::labeler::AggregationMode::Render,
                    ModeArg::Centroid => splatseg::labeler::AggregationMode::Centroid,
                };
            }
            if let Some(v) = min_votes {
                ctx.config.aggregation.min_votes = v;
            }
            ctx.config.validate()?;
            commands::label(&ctx, &scene, &cameras, &masks, &output, timestamp)
        }
        Command::RenderMask {
            scene,
            cameras,
            out_dir,
            refine,
        } => commands::render_mask(&ctx, &scene, &cameras, &out_dir, refine),
        Command::Refine { input, output } => commands::refine(&ctx, &input, &output),
        Command::Eval {
            pred_dir,
            gt_dir,
            pred_prefix,
            matching,
            csv,
        } => {
            let matching = match matching {
                MatchingArg::Identity => splatseg::eval::Matching::Identity,
                MatchingArg::Hungarian => splatseg::eval::Matching::Hungarian,
            };
            commands::eval(&ctx, &pred_dir, &gt_dir, &pred_prefix, matching, csv.as_deref())
        }
        Command::Bench {
            scene,
            cameras,
            masks,
            reps,
        } => commands::bench(&ctx, &scene, &cameras, &masks, reps),
        Command::Robust {
            scene,
            cameras,
            masks,
            sizes,
            seed,
            reps,
            csv,
        } => commands::robust(&ctx, &scene, &cameras, &masks, &sizes, seed, reps, csv.as_deref()),
        Command::Stage {
            scene,
            cameras,
            masks,
            csv,
        } => commands::stage(&ctx, &scene, &cameras, &masks, csv.as_deref()),
        Command::Synth {
            spec,
            out,
            corrupt,
            corrupt_seed,
        } => commands::synth(&ctx, spec.as_deref(), &out, corrupt.as_deref(), corrupt_seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
