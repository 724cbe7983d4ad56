//! `pdc`: generate data, train templates, extract meshes, transfer and
//! evaluate correspondences.

mod commands;
mod config;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pdc_core::geometry::Family;
use pdc_core::Error;

use commands::{AttributeKind, EvalArgs, EvalMetrics, FitOptions, TransferArgs};

#[derive(Parser)]
#[command(name = "pdc", version, about = "Implicit templates with part deformation consistency")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Sphere,
    Chair,
    Table,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Sphere => Family::Sphere,
            FamilyArg::Chair => Family::Chair,
            FamilyArg::Table => Family::Table,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Keypoints,
    Labels,
}

#[derive(clap::Args, Clone, Copy)]
struct FitArgs {
    /// Latent optimisation steps when a code has to be fitted.
    #[arg(long, default_value_t = 300)]
    fit_steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    fit_lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl From<FitArgs> for FitOptions {
    fn from(a: FitArgs) -> Self {
        Self {
            steps: a.fit_steps,
            lr: a.fit_lr,
            seed: a.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset of shape and keypoint files.
    Gen {
        #[arg(long, value_enum, default_value = "sphere")]
        family: FamilyArg,
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2048)]
        n_surface: usize,
        #[arg(long, default_value_t = 2048)]
        n_query: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on the dataset named in a config file.
    Train {
        config: PathBuf,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Marching-cubes the template field into an OBJ file.
    Template {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Transfer keypoints or part labels from one shape to another.
    Transfer {
        checkpoint: PathBuf,
        source: PathBuf,
        target: PathBuf,
        #[arg(long, value_enum, default_value = "keypoints")]
        kind: KindArg,
        /// Nearest points in the label vote.
        #[arg(short, default_value_t = 10)]
        n: usize,
        /// Use trained code `i` for the source instead of fitting one.
        #[arg(long)]
        source_index: Option<usize>,
        #[arg(long)]
        target_index: Option<usize>,
        /// Source keypoints; defaults to the .kp file beside the shape.
        #[arg(long)]
        source_keypoints: Option<PathBuf>,
        /// Ground-truth target keypoints for the report.
        #[arg(long)]
        target_keypoints: Option<PathBuf>,
        #[command(flatten)]
        fit: FitArgs,
        /// Report CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the transferred keypoints or labels here.
        #[arg(long)]
        predicted: Option<PathBuf>,
    },
    /// Per-shape Chamfer, PCK and mIoU report over a dataset.
    Eval {
        checkpoint: PathBuf,
        data: PathBuf,
        #[arg(long)]
        chamfer: bool,
        #[arg(long)]
        pck: bool,
        #[arg(long)]
        miou: bool,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        /// Fit codes even when the dataset is the training set.
        #[arg(long)]
        refit: bool,
        #[arg(short, default_value_t = 10)]
        n: usize,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a latent code to an unseen shape.
    Fit {
        checkpoint: PathBuf,
        shape: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

fn thread_pool() -> Result<(), String> {
    let Ok(v) = std::env::var("PDC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("PDC_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(cmd: Command) -> pdc_core::Result<()> {
    match cmd {
        Command::Gen {
            family,
            count,
            seed,
            n_surface,
            n_query,
            out,
        } => commands::cmd_gen(family.into(), count, seed, n_surface, n_query, &out),
        Command::Train { config, resume } => commands::cmd_train(&config, resume),
        Command::Template { checkpoint, resolution, out } => commands::cmd_template(&checkpoint, resolution, &out),
        Command::Transfer {
            checkpoint,
            source,
            target,
            kind,
            n,
            source_index,
            target_index,
            source_keypoints,
            target_keypoints,
            fit,
            out,
            predicted,
        } => commands::cmd_transfer(&TransferArgs {
            checkpoint: &checkpoint,
            source: &source,
            target: &target,
            kind: match kind {
                KindArg::Keypoints => AttributeKind::Keypoints,
                KindArg::Labels => AttributeKind::Labels,
            },
            n,
            source_index,
            target_index,
            source_keypoints,
            target_keypoints,
            fit: fit.into(),
            out,
            predicted,
        }),
        Command::Eval {
            checkpoint,
            data,
            chamfer,
            pck,
            miou,
            resolution,
            refit,
            n,
            fit,
            out,
        } => {
            let all = !(chamfer || pck || miou);
            commands::cmd_eval(&EvalArgs {
                checkpoint: &checkpoint,
                data: &data,
                metrics: EvalMetrics {
                    chamfer: chamfer || all,
                    pck: pck || all,
                    miou: miou || all,
                },
                resolution,
                refit,
                n,
                fit: fit.into(),
                out,
            })
        }
        Command::Fit { checkpoint, shape, fit, out } => commands::cmd_fit(&checkpoint, &shape, fit.into(), &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = thread_pool() {
        eprintln!("pdc: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pdc: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
