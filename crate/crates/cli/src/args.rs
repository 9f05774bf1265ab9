use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "qtrack", version, about = "Query-space polyp tracking: synthesize, track, evaluate, report")]
pub struct Cli {
    /// Worker threads for parallel sections (default: all cores)
    #[arg(long, global = true, value_name = "K")]
    pub threads: Option<usize>,

    /// Only log errors
    #[arg(long, global = true)]
    pub quiet: bool,

    /// JSON file with settings; command-line flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assign track ids to the non-empty query slots of a stream
    Track(TrackArgs),
    /// Detection and segmentation scores of a stream against ground truth
    EvalDet(EvalDetArgs),
    /// HOTA, MOTA and IDF1 of a tracks file against ground truth
    EvalTrack(EvalTrackArgs),
    /// Per-video exam report from a tracks file and its stream
    Report(ReportArgs),
    /// Generate a synthetic ground truth and detector stream
    Synth(SynthArgs),
    /// Per-frame training losses of a stream against ground truth
    LossCheck(LossCheckArgs),
    /// Run the built-in oracle suites
    Selfcheck,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Empty-slot threshold on the best class probability
    #[arg(long)]
    pub tau: Option<f64>,
    /// Consecutive empty frames a track survives
    #[arg(long)]
    pub patience: Option<u32>,
    /// Associate by box/mask overlap instead of query embeddings
    #[arg(long)]
    pub baseline_iou: bool,
    /// Minimum overlap for the overlap baseline
    #[arg(long)]
    pub iou_floor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalDetArgs {
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub gt: PathBuf,
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalTrackArgs {
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub gt: PathBuf,
    /// Overlap threshold for MOTA and IDF1 matches
    #[arg(long)]
    pub match_iou: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_name = "FILE")]
    pub tracks: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub stream: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long)]
    pub min_frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_parser = ["static", "occlusion", "large_motion", "swap", "drift"])]
    pub scenario: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub out_gt: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out_pred: PathBuf,
    /// Override the scenario's frame count
    #[arg(long)]
    pub frames: Option<u64>,
}

#[derive(Debug, Args)]
pub struct LossCheckArgs {
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub gt: PathBuf,
    /// JSON file with loss weights
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,
}
