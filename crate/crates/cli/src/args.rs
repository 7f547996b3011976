use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phasect::phantoms::ImageClass;
use phasect::phasediagram::{DiagramKind, GeometryKind};
use phasect::solvers::ProblemKind;
use phasect::theory::{Coords, PsiKind};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "phasect",
    version,
    about = "Phase diagrams and critical sampling for sparse CT recovery",
    after_help = "Every command also accepts --config FILE (key=value lines, flags win). \
                  `phasect --replay MANIFEST` re-runs a recorded command."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build a measurement matrix and write it as Matrix Market.
    Matrix(MatrixArgs),
    /// Draw a test image.
    Phantom(PhantomArgs),
    /// Reconstruct an image from data by P1, LP or TV minimization.
    Solve(SolveArgs),
    /// Sweep a phase diagram.
    Diagram(DiagramArgs),
    /// Extract a level contour from a success-rate grid.
    Contour(ContourArgs),
    /// Transition widths (5% to 95%) along the lines of a rate grid.
    Width(WidthArgs),
    /// Theoretical Gaussian transition curve.
    Theory(TheoryArgs),
    /// Convert a curve between DT and ALMT coordinates.
    Convert(ConvertArgs),
    /// Predict the critical number of views for a sparsity.
    Predict(PredictArgs),
    /// Reconstruction error of one image against the number of views.
    RecoveryCurve(RecoveryArgs),
    /// Render an image vector or a rate grid as 8-bit PGM.
    Render(RenderArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Matrix(_) => "matrix",
            Command::Phantom(_) => "phantom",
            Command::Solve(_) => "solve",
            Command::Diagram(_) => "diagram",
            Command::Contour(_) => "contour",
            Command::Width(_) => "width",
            Command::Theory(_) => "theory",
            Command::Convert(_) => "convert",
            Command::Predict(_) => "predict",
            Command::RecoveryCurve(_) => "recovery-curve",
            Command::Render(_) => "render",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Reduced grids and faster solver settings for a single machine.
    Desk,
}

/// Comma-separated list.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<T>().map_err(|e| format!("'{t}': {e}")))
            .collect::<Result<Vec<T>, String>>()
            .map(List)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// File of key=value lines supplying flag defaults; flags on the command line win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Named set of defaults.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    /// Dual-ball scale; affects convergence speed, not the minimizer [default: 1e-4, desk: 1e-2 (P1/LP) or 1e-3 (TV)].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Iteration budget K [default: 20000].
    #[arg(long)]
    pub iters: Option<usize>,
    /// Early-exit tolerance on relative residual and iterate change; 0 runs all K [default: 1e-8].
    #[arg(long)]
    pub feas_tol: Option<f64>,
    /// History record interval [default: 100].
    #[arg(long)]
    pub log_every: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MatrixArgs {
    /// fanbeam, fanbeam_rand, random_rays or gaussian.
    #[arg(long)]
    pub geometry: GeometryKind,
    /// Side length of the square image grid.
    #[arg(long)]
    pub nside: usize,
    /// Number of views (fan-beam geometries).
    #[arg(long)]
    pub views: Option<usize>,
    /// Number of rays (random_rays).
    #[arg(long)]
    pub rays: Option<usize>,
    /// Number of rows (gaussian).
    #[arg(long)]
    pub rows: Option<usize>,
    /// Columns of a flat gaussian domain [default: pixels in the disk].
    #[arg(long)]
    pub n_pixels: Option<usize>,
    /// Angular offset of the first fan-beam view in degrees.
    #[arg(long, default_value_t = phasect::sensing::DEFAULT_OFFSET_DEG)]
    pub offset_deg: f64,
    /// Source distance from the center in pixels [default: 2 * nside].
    #[arg(long)]
    pub source_radius: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output .mtx path; the sidecar goes to <out>.json.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PhantomArgs {
    /// signedspikes, spikes, altprojisotv or grains.
    #[arg(long)]
    pub class: ImageClass,
    #[arg(long)]
    pub nside: usize,
    /// Absolute sparsity: pixels, gradient groups, or grain count.
    #[arg(long, conflicts_with = "fraction")]
    pub sparsity: Option<usize>,
    /// Sparsity as a fraction of the pixel count.
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV, one value per line.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write an 8-bit PGM rendering here.
    #[arg(long)]
    pub render: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    /// Matrix Market file with its JSON sidecar.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Data vector b (CSV).
    #[arg(long, required_unless_present = "phantom")]
    pub data: Option<PathBuf>,
    /// Simulate b = A x from this image; also used as the reference.
    #[arg(long, conflicts_with = "data")]
    pub phantom: Option<PathBuf>,
    /// Reference image for error reporting.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// p1, lp or tv.
    #[arg(long)]
    pub problem: ProblemKind,
    /// Image side for the TV gradient [default: from the matrix sidecar].
    #[arg(long)]
    pub nside: Option<usize>,
    /// Solve P1/LP exactly with the interior-point oracle.
    #[arg(long)]
    pub oracle: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output image CSV; the summary goes to <out>.json.
    #[arg(long)]
    pub out: PathBuf,
    /// History CSV [default: <out stem>.history.csv].
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiagramArgs {
    /// dt or almt.
    #[arg(long = "type")]
    pub diagram_type: DiagramKind,
    /// fanbeam, fanbeam_rand, random_rays or gaussian.
    #[arg(long)]
    pub geometry: GeometryKind,
    /// signedspikes, spikes, altprojisotv or grains.
    #[arg(long)]
    pub class: ImageClass,
    /// p1, lp or tv.
    #[arg(long)]
    pub problem: ProblemKind,
    /// [default: 64, desk: 16]
    #[arg(long)]
    pub nside: Option<usize>,
    /// Realizations per cell [default: 100, desk: 20].
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Sampling levels: views (fan-beam) or rows [default: up to full sampling].
    #[arg(long)]
    pub sampling: Option<List<usize>>,
    /// Sparsity levels: s/N (almt) or rho (dt) [default: k/40 or k/32; desk: 10 or 16 levels].
    #[arg(long)]
    pub sparsity: Option<List<f64>>,
    /// Flat gaussian domain size instead of the disk.
    #[arg(long)]
    pub n_pixels: Option<usize>,
    /// Largest P1/LP problem solved by the exact oracle instead of iterations.
    #[arg(long)]
    pub oracle_max_vars: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; PHASECT_WORKERS overrides [default: all cores].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Compute at most this many new tasks, then stop (resumable).
    #[arg(long)]
    pub stop_after: Option<usize>,
    /// Output directory; a checkpoint inside it is resumed.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisArg {
    Sparsity,
    Sampling,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ContourArgs {
    /// rates.csv written by `diagram`.
    #[arg(long)]
    pub rates: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub level: f64,
    /// Output curve CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the full traced polyline and secondary crossings here.
    #[arg(long)]
    pub polyline: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WidthArgs {
    #[arg(long)]
    pub rates: PathBuf,
    /// Direction of the lines [default: sampling for almt, sparsity for dt].
    #[arg(long, value_enum)]
    pub axis: Option<AxisArg>,
    /// Output CSV: position,width.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TheoryArgs {
    /// l1 or l1_nonneg.
    #[arg(long)]
    pub curve: PsiKind,
    /// dt or almt.
    #[arg(long)]
    pub coords: Coords,
    #[arg(long, default_value_t = 99)]
    pub points: usize,
    /// First grid value (s/N for almt, rho for dt).
    #[arg(long, default_value_t = 0.025)]
    pub from: f64,
    /// Last grid value.
    #[arg(long, default_value_t = 0.975)]
    pub to: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConvertArgs {
    /// Curve CSV; its sidecar supplies the coordinates when present.
    #[arg(long)]
    pub curve: PathBuf,
    /// Coordinates of a curve without sidecar.
    #[arg(long)]
    pub from: Option<Coords>,
    #[arg(long)]
    pub to: Coords,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    /// Transition curve CSV.
    #[arg(long)]
    pub contour: PathBuf,
    /// Coordinates to predict in (dt or almt); the curve is converted if needed.
    #[arg(long)]
    pub coords: Coords,
    /// Absolute sparsity s.
    #[arg(long)]
    pub sparsity: f64,
    /// Pixel count N.
    #[arg(long)]
    pub n_pixels: usize,
    #[arg(long)]
    pub rays_per_view: usize,
    /// Also write the JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RecoveryArgs {
    /// Image CSV; otherwise one is drawn from --class/--sparsity/--seed.
    #[arg(long)]
    pub phantom: Option<PathBuf>,
    #[arg(long, required_unless_present = "phantom")]
    pub class: Option<ImageClass>,
    #[arg(long, required_unless_present = "phantom")]
    pub sparsity: Option<usize>,
    #[arg(long)]
    pub nside: usize,
    #[arg(long, default_value = "fanbeam")]
    pub geometry: GeometryKind,
    /// View counts to reconstruct from.
    #[arg(long)]
    pub views: List<usize>,
    #[arg(long, default_value = "tv")]
    pub problem: ProblemKind,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV: views,image_rmse,data_rmse,relative_error,iterations.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderKind {
    Image,
    Rates,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RenderArgs {
    /// Image CSV or rates.csv.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "image")]
    pub kind: RenderKind,
    /// Image side [default: from the image sidecar].
    #[arg(long)]
    pub nside: Option<usize>,
    /// Window low end [default: min(0, min x)].
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    /// Window high end [default: max x].
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}
