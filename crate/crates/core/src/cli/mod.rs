//! Command-line front end. Every command writes one JSON document holding a
//! run manifest and the command's results.

pub mod commands;
pub mod dataset;
pub mod output;

use crate::error::GeoError;
use crate::integrate::OdeScheme;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

pub const SCHEMA: &str = "landmark-geo/1";

#[derive(Debug, Parser)]
#[command(name = "landmark-geo", version, about = "Geometry and statistics on landmark shape manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Integrate a geodesic from a shape and an initial tangent vector.
    Geodesic(GeodesicArgs),
    /// Match two shapes by geodesic shooting (logarithm map).
    Match(MatchArgs),
    /// Parallel transport tangent vectors along a geodesic.
    Transport(TransportArgs),
    /// Christoffel symbols at a shape.
    Christoffel(ChristoffelArgs),
    /// Fréchet mean of a dataset.
    FrechetMean(FrechetMeanArgs),
    /// Brownian motion in coordinates.
    Brownian(BrownianArgs),
    /// Stochastic development of Euclidean Brownian motion through a frame.
    Develop(DevelopArgs),
    /// Joint mean and covariance frame by the frame-bundle Fréchet objective.
    FrechetFm(FrechetFmArgs),
    /// Generate synthetic datasets.
    Synth(SynthArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Geodesic(_) => "geodesic",
            Self::Match(_) => "match",
            Self::Transport(_) => "transport",
            Self::Christoffel(_) => "christoffel",
            Self::FrechetMean(_) => "frechet-mean",
            Self::Brownian(_) => "brownian",
            Self::Develop(_) => "develop",
            Self::FrechetFm(_) => "frechet-fm",
            Self::Synth(_) => "synth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Euler,
    Rk4,
}

impl From<SchemeArg> for OdeScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Euler => OdeScheme::Euler,
            SchemeArg::Rk4 => OdeScheme::Rk4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Json,
    Csv,
}

/// Options shared by the commands that read a dataset and integrate.
#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Dataset file (JSON or CSV).
    #[arg(long)]
    pub input: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// CSV input starts with a header row.
    #[arg(long)]
    pub header: bool,
    /// Kernel width; defaults to the mean distance between consecutive
    /// landmarks of the dataset's mean shape.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Rk4)]
    pub scheme: SchemeArg,
    /// Integration time.
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GeodesicArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Index of the starting shape in the dataset.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// JSON file with a `tangent` field of per-landmark vectors; zero when omitted.
    #[arg(long)]
    pub tangent: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MatchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset holding the target shape.
    #[arg(long)]
    pub input2: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, default_value_t = 0)]
    pub index2: usize,
    /// Relative tolerance on the shooting loss.
    #[arg(long, default_value_t = 1e-16)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TransportArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Geodesic initial velocity (JSON with a `tangent` field).
    #[arg(long, conflicts_with = "input2")]
    pub tangent: Option<PathBuf>,
    /// Target shape; the geodesic is found by matching.
    #[arg(long)]
    pub input2: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub index2: usize,
    /// JSON file with a `vectors` field (list of per-landmark vector lists);
    /// defaults to the unit x and y translations.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-16)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ChristoffelArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FrechetMeanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Start from this sample instead of the Euclidean average.
    #[arg(long)]
    pub init_index: Option<usize>,
    /// Relative reduction of the gradient norm at which to stop.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BrownianArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Number of sample paths; path `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Emit only endpoints, not whole paths.
    #[arg(long)]
    pub endpoints_only: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DevelopArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Frame columns; the frame is the leading columns of the Cholesky
    /// factor of the cometric. Defaults to the full dimension.
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub endpoints_only: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FrechetFmArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Frame columns; defaults to the full dimension.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Weight of the data term.
    #[arg(long, default_value_t = 100.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    /// Two concentric ellipses.
    Ellipses,
    /// Geodesic perturbations of an ellipse by random tangent vectors.
    Geodesic,
    /// Gaussian coordinate noise around an ellipse.
    Gaussian,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 100)]
    pub landmarks: usize,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Semi-axes of the (first) ellipse.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 0.5)]
    pub b: f64,
    /// Semi-axes of the second ellipse.
    #[arg(long, default_value_t = 0.8)]
    pub a2: f64,
    #[arg(long, default_value_t = 0.7)]
    pub b2: f64,
    /// Largest metric norm of the tangent vectors for `geodesic`.
    #[arg(long, default_value_t = 0.3)]
    pub radius: f64,
    /// Standard deviation for `gaussian`.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Kernel width for `geodesic`; defaults to the ellipse's mean landmark spacing.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Result of a successful command run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NoConvergence,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Ok => 0,
            Self::NoConvergence => 2,
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Failures are reported as JSON on standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            report_error("usage", &e.to_string());
            return 1;
        }
    };
    match commands::run(&cli.command) {
        Ok(status) => status.exit_code(),
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            match e {
                GeoError::NoConvergence { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn report_error(kind: &str, message: &str) {
    let doc = serde_json::json!({
        "schema": SCHEMA,
        "error": { "kind": kind, "message": message.trim_end() },
    });
    eprintln!("{doc}");
}
