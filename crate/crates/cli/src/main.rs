#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trajecto::par::Execution;

mod commands;
mod config;
mod pipeline;

use config::{Method, Mode};
use pipeline::RunError;

/// Aircraft trajectories from video frames by space resection.
///
/// Exit status: 0 success, 1 configuration error, 2 processing error,
/// 3 empty result. Log verbosity is read from TRAJECTO_LOG
/// (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "trajecto", version)]
struct Cli {
    /// Run per-frame stages on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pick sharp, well-overlapping frames from a frame manifest.
    SelectFrames(SelectArgs),
    /// Focal length from a measured field of view.
    FocalInit(FocalArgs),
    /// Camera poses from ground control measurements.
    Resect(ResectArgs),
    /// Object positions from a known camera pose or track.
    FixObject(FixArgs),
    /// Fuse two orientation blocks by a similarity transform.
    Fuse(FuseArgs),
    /// Trajectory CSV/KML from an orientation block.
    Export(ExportArgs),
    /// Compare a trajectory CSV against a reference track.
    Compare(CompareArgs),
    /// Full pipeline from a configuration file.
    Run(RunArgs),
}

#[derive(Args)]
pub struct SelectArgs {
    /// Frame manifest (index,time_s,image_path).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Subset manifest to write.
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub drop_fraction: f64,
    #[arg(long, default_value_t = 0.8)]
    pub overlap_target: f64,
    #[arg(long, default_value_t = 2.0)]
    pub target_fps: f64,
    #[arg(long, default_value_t = 2)]
    pub search_window: usize,
}

#[derive(Args)]
pub struct FocalArgs {
    /// Field of view, degrees.
    #[arg(long)]
    pub fov_deg: f64,
    /// Axis the field of view was measured along.
    #[arg(long, default_value = "diagonal")]
    pub fov_axis: String,
    #[arg(long)]
    pub sensor_w_mm: f64,
    #[arg(long)]
    pub sensor_h_mm: f64,
    /// Projection model; all three are reported when omitted.
    #[arg(long)]
    pub model: Option<String>,
    /// Write an intrinsics file (needs --model, --image-w, --image-h).
    #[arg(long, short, requires_all = ["model", "image_w", "image_h"])]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub image_w: Option<u32>,
    #[arg(long)]
    pub image_h: Option<u32>,
}

#[derive(Args)]
pub struct ResectArgs {
    /// Needed for P3P.
    #[arg(long)]
    pub intrinsics: Option<PathBuf>,
    #[arg(long)]
    pub gcps: PathBuf,
    #[arg(long)]
    pub measurements: PathBuf,
    /// Frame times; every manifest frame is resected.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::P3p)]
    pub method: Method,
    #[arg(long, default_value_t = trajecto::resection::DEFAULT_REJECTION_PX)]
    pub rejection_px: f64,
    /// Orientation block to write.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct FixArgs {
    #[arg(long)]
    pub intrinsics: PathBuf,
    #[arg(long)]
    pub object_model: PathBuf,
    #[arg(long)]
    pub measurements: PathBuf,
    /// Camera orientation block: one pose for a fixed camera, or one per
    /// frame id.
    #[arg(long)]
    pub camera_block: PathBuf,
    /// Frame times; defaults to the camera block times (moving camera).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Use the earliest camera pose for every frame.
    #[arg(long)]
    pub fixed: bool,
    #[arg(long, default_value_t = trajecto::resection::DEFAULT_REJECTION_PX)]
    pub rejection_px: f64,
    /// Object orientation block to write.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct FuseArgs {
    /// Target block; its frame is kept.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Pull toward b on common frames, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub weight: f64,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct GeoArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub lat: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub lon: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub alt: f64,
    #[arg(long, default_value_t = trajecto::trajectory::EARTH_RADIUS_M)]
    pub earth_radius_m: f64,
}

#[derive(Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub block: PathBuf,
    #[command(flatten)]
    pub geo: GeoArgs,
    /// Boresight pitch, roll, yaw in degrees.
    #[arg(long, num_args = 3, value_names = ["PITCH", "ROLL", "YAW"], allow_hyphen_values = true)]
    pub boresight_deg: Option<Vec<f64>>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub kml: Option<PathBuf>,
    #[arg(long, default_value = "trajectory")]
    pub name: String,
}

#[derive(Args)]
pub struct CompareArgs {
    /// Trajectory CSV as written by `export`.
    #[arg(long)]
    pub trajectory: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    /// Origin for a geodetic reference (time_s,lat,lon,alt); without it the
    /// reference is read as local time_s,x,y,z.
    #[arg(long, num_args = 3, value_names = ["LAT", "LON", "ALT"], allow_hyphen_values = true)]
    pub origin: Option<Vec<f64>>,
    #[arg(long, default_value_t = trajecto::trajectory::EARTH_RADIUS_M, requires = "origin")]
    pub earth_radius_m: f64,
    #[arg(long, default_value_t = 5.0)]
    pub planimetric_m: f64,
    #[arg(long, default_value_t = 10.0)]
    pub altimetric_m: f64,
}

/// Flags override the configuration file.
#[derive(Args)]
pub struct RunArgs {
    #[arg(long, short)]
    pub config: PathBuf,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub rejection_px: Option<f64>,
    /// Process every manifest frame.
    #[arg(long)]
    pub no_selection: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TRAJECTO_LOG", "warn")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result: Result<(), RunError> = match cli.command {
        Command::SelectFrames(a) => commands::select(&a, exec),
        Command::FocalInit(a) => commands::focal(&a),
        Command::Resect(a) => commands::resect(&a, exec),
        Command::FixObject(a) => commands::fix_object(&a, exec),
        Command::Fuse(a) => commands::fuse(&a),
        Command::Export(a) => commands::export(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Run(a) => commands::run(&a, exec),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trajecto: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
