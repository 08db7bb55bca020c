use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "offnadir",
    version,
    about = "Off-nadir building reconstruction toolkit"
)]
#[command(propagate_version = true)]
pub struct Cli {
    /// Worker threads for per-image work (default: all cores). Output does
    /// not depend on this value.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic scenes with exact ground truth.
    Synth(SynthArgs),
    /// Report the supervision level of every image.
    Grade(GradeArgs),
    /// Check offsets against heights and image poses.
    Validate(ValidateArgs),
    /// Strip annotations to emulate mixed supervision.
    Degrade(DegradeArgs),
    /// Compute pseudo bounding boxes.
    Pbc(PbcArgs),
    /// Derive footprints from roofs and offsets.
    Footprint(FootprintArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Combine per-sample loss components.
    Loss(LossArgs),
    /// Extrude footprints into an OBJ city model.
    Reconstruct(ReconstructArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GradeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Also write the grades as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Allowed offset deviation in pixels.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Write the full report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Fraction of images kept fully annotated.
    #[arg(long)]
    pub frac_oh: f64,
    /// Fraction of images reduced to footprints and heights.
    #[arg(long)]
    pub frac_h: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoxStrategy {
    /// Pose-guided box where possible, footprint expansion otherwise.
    Auto,
    Pose,
    Expand,
}

#[derive(Debug, Args)]
pub struct PbcArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output JSON (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BoxStrategy::Auto)]
    pub strategy: BoxStrategy,
    #[arg(long, default_value_t = offnadir_core::pbc::DEFAULT_EXPAND_RATIO)]
    pub expand_ratio: f64,
    /// Predicted tangent of the off-nadir angle, replacing every image pose.
    #[arg(long, requires = "phi")]
    pub tan_theta: Option<f64>,
    /// Predicted offset direction in radians.
    #[arg(long, requires = "tan_theta")]
    pub phi: Option<f64>,
    /// Pixels per meter for the override pose when an image has none.
    #[arg(long, default_value_t = 1.0)]
    pub scale_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FootprintMode {
    Polygon,
    Raster,
}

impl FootprintMode {
    pub fn extractor_name(self) -> &'static str {
        match self {
            Self::Polygon => "polygon",
            Self::Raster => "raster",
        }
    }
}

#[derive(Debug, Args)]
pub struct FootprintArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output JSON (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FootprintMode::Polygon)]
    pub mode: FootprintMode,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = offnadir_core::metrics::DEFAULT_IOU_THRESHOLD)]
    pub iou: f64,
    /// Report JSON; without it the report is printed.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// `{"samples": [{"id", "level", <components>}]}`
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Loss weights JSON; omitted keys keep their defaults.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// OBJ file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Simplification tolerance in pixels.
    #[arg(long, default_value_t = offnadir_core::reconstruct::DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Height in meters for buildings without one.
    #[arg(long)]
    pub default_height: Option<f64>,
    /// Pixels per meter for images without a pose.
    #[arg(long, default_value_t = 1.0)]
    pub scale_s: f64,
}
