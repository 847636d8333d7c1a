use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Cross-modal augmentation and LSTM quality scoring of exercise recordings.
///
/// Every `--flag` can also be set in a `--config` file as `flag = value`;
/// the command line wins over the file, the file over built-in defaults.
#[derive(Debug, Parser)]
#[command(name = "rehab", disable_version_flag = true)]
pub struct Cli {
    /// key=value file supplying defaults for subcommand flags
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print the tool version and the file format versions it reads and writes
    #[arg(long)]
    pub version: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an amplitude-graded synthetic dataset
    Synth(SynthArgs),
    /// Write augmented copies of every original sample in a manifest
    Augment(AugmentArgs),
    /// Dump per-frame feature vectors, or the feature registry
    Features(FeaturesArgs),
    /// Fit one model on all samples of an exercise
    Train(TrainArgs),
    /// k-fold cross-validation with training-only augmentation
    Cv(CvArgs),
    /// Cross-validation over several presets with shared folds and seeds
    Ablate(AblateArgs),
    /// Redraw the scatter plot from a predictions file
    Plot(PlotArgs),
    /// Check keypoint files for schema and invariant violations
    Validate(ValidateArgs),
    /// Reference pose backend for synthetic marker frames
    ///
    /// Follows the external backend contract: reads `frame_%06d.ppm` files
    /// from --frames and writes a kp-seq/1 file to --out.
    MarkerPose(MarkerPoseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Joints,
    Image,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Stratified,
    Random,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory [default: $REHAB_OUT_ROOT/<command> or rehab-out/<command>]
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=5))]
    pub exercise: u8,
    #[arg(long, default_value_t = 60)]
    pub count: usize,
    /// Movement amplitudes are spread evenly over LO:HI
    #[arg(long, default_value = "0.2:1.0", value_name = "LO:HI")]
    pub amplitude_range: String,
    #[arg(long, default_value_t = 4.0)]
    pub noise_px: f64,
    /// Frames per recording
    #[arg(long, default_value_t = 60)]
    pub frames: usize,
    #[arg(long, default_value_t = 0.5)]
    pub tempo_hz: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write marker frames to frames/<sample_id>/frame_%06d.ppm
    #[arg(long)]
    pub render_frames: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct AugmentationArgs {
    #[arg(long, value_enum, default_value_t = SpaceArg::Joints)]
    pub space: SpaceArg,
    /// Pose backend command for --space image, run as
    /// `<cmd> --frames <dir> --out <file>`; `builtin:markers` uses the
    /// in-process marker detector
    #[arg(long, value_name = "CMD")]
    pub pose_cmd: Option<String>,
    /// Read source frames from <DIR>/<sample_id>/ instead of rendering
    /// markers from the keypoints
    #[arg(long, value_name = "DIR")]
    pub frames_root: Option<PathBuf>,
    /// Allow concurrent calls into the pose command
    #[arg(long)]
    pub pose_reentrant: bool,
    /// Custom op list such as `hflip,rot-2,rot+2`, used instead of a named preset
    #[arg(long, value_name = "LIST")]
    pub ops: Option<String>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_parser = ["a1", "a7"], required_unless_present = "ops")]
    pub preset: Option<String>,
    /// Only augment samples of this exercise
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    pub exercise: Option<u8>,
    #[command(flatten)]
    pub aug: AugmentationArgs,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long, required_unless_present = "registry")]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    pub exercise: Option<u8>,
    /// Print the feature registry table and exit
    #[arg(long)]
    pub registry: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    #[arg(long, default_value_t = 0.17)]
    pub dropout: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    pub exercise: u8,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    pub exercise: u8,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::Stratified)]
    pub fold_strategy: StrategyArg,
    #[command(flatten)]
    pub aug: AugmentationArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long, value_parser = ["none", "a1", "a7"], default_value = "none")]
    pub preset: String,
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Comma-separated preset names; `custom` refers to --ops
    #[arg(long, default_value = "none,a1")]
    pub presets: String,
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// A cv_predictions.csv file
    #[arg(long)]
    pub predictions: PathBuf,
    /// Output path without extension; .svg and .csv are written
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// kp-seq/1 files
    pub files: Vec<PathBuf>,
    /// Also validate every file a manifest refers to
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MarkerPoseArgs {
    #[arg(long, value_name = "DIR")]
    pub frames: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=5))]
    pub exercise: u8,
    #[arg(long, default_value = "unknown")]
    pub subject: String,
}
