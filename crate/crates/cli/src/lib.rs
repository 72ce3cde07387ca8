//! `orientseg` command-line front end and annotation review server.

pub mod commands;
pub mod dataset_dir;
pub mod review;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::execute;

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status for invalid data or a failed check.
pub const EXIT_INVALID: i32 = 1;
/// Exit status for bad command-line usage.
pub const EXIT_USAGE: i32 = 2;

/// A command line that parsed but cannot be acted on.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Parser)]
#[command(name = "orientseg", version, about = "Oriented-box slap fingerprint segmentation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic slap dataset.
    Synth {
        /// JSON synth spec; defaults are used for missing fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write randomly rotated copies of a dataset.
    Augment(AugmentArgs),
    /// Map augmented annotations back onto their source images.
    Unrotate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check an annotation or prediction file against the schema.
    Validate {
        file: PathBuf,
        /// Treat the file as predictions (every box needs a score).
        #[arg(long)]
        predictions: bool,
    },
    /// Emit the anchor set of a feature grid as JSONL.
    Anchors {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label anchors against the ground-truth boxes of each record.
    Assign {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 0.7)]
        positive: f64,
        #[arg(long, default_value_t = 0.3)]
        negative: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score filtering and class-wise rotated NMS over a prediction file.
    Nms {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value_t = 0.7)]
        score_threshold: f64,
        #[arg(long, default_value_t = 0.5)]
        iou_threshold: f64,
        #[arg(long, default_value_t = 1000)]
        max_keep: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cut one upright PNG per box out of a slap image.
    Crop {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        boxes: PathBuf,
        #[arg(long)]
        outdir: PathBuf,
        /// Record to use when the box file holds several.
        #[arg(long)]
        slap_id: Option<String>,
    },
    /// Segmentation report: per-side MAE, EAP, label accuracy, tolerance.
    EvalSeg(EvalSegArgs),
    /// Finger-label accuracy per cohort.
    EvalLabels {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// ROC and TAR at a fixed FAR from a score file or a synthetic dataset.
    EvalMatch(EvalMatchArgs),
    /// Check loss gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
    /// Serve a dataset directory to the review UI.
    ReviewServe {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub per_slap: usize,
    #[arg(long, default_value_t = -90.0, allow_negative_numbers = true)]
    pub min: f64,
    #[arg(long, default_value_t = 90.0, allow_negative_numbers = true)]
    pub max: f64,
    /// `expand` keeps every source pixel, `crop` keeps the source size.
    #[arg(long, default_value = "expand")]
    pub canvas: String,
}

#[derive(Debug, Args)]
pub struct EvalSegArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Report path; standard output when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// CSV of error histogram bins.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub bin_width: f64,
    #[arg(long, default_value_t = -32.0, allow_negative_numbers = true)]
    pub gtl_left_right: f64,
    #[arg(long, default_value_t = -64.0, allow_negative_numbers = true)]
    pub gtl_top_bottom: f64,
}

#[derive(Debug, Args)]
pub struct EvalMatchArgs {
    /// Score file, one trial per line.
    #[arg(long, conflicts_with = "dataset")]
    pub scores: Option<PathBuf>,
    /// Annotations used to split score-file trials by cohort; probe ids
    /// are `<slap_id>/<label>`.
    #[arg(long, requires = "scores")]
    pub annotations: Option<PathBuf>,
    /// Dataset directory scored with the synthetic texture scorer.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Where to write the synthetic scores.
    #[arg(long, requires = "dataset")]
    pub write_scores: Option<PathBuf>,
    #[arg(long, default_value_t = 0.001)]
    pub far: f64,
    #[arg(long, default_value_t = 20)]
    pub impostors: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Parses `argv` and runs the command. Returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_INVALID
            }
        }
    }
}
