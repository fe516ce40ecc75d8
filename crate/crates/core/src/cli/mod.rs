//! Command-line front end.
//!
//! Table-producing commands write CSV (to `--out` or stdout); scalar commands
//! print a JSON document and can also write the table behind it with `--out`.
//! Exit status is 0 on success, 1 for argument or domain errors and 2 for
//! numerical failures.

mod commands;
pub mod config;
pub mod svg;
pub mod table;

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::asymptotics::AsymptoticsError;
use crate::bell::BellError;
use crate::field::FieldError;
use crate::formfactor::{Formfactor, FormfactorError};
use crate::franson::FransonError;
use crate::grid::{GridError, RadialGrid, Spacing};
use crate::quadrature::{QuadratureError, QuadratureSpec};

pub use svg::{emit_svg, render_svg, Axes};
pub use table::{Provenance, SweepTable, ARTIFACT_VERSION};

pub const THREADS_ENV: &str = "ENTANGLE_LAB_THREADS";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Numerical(_) => 2,
        }
    }
}

impl From<QuadratureError> for CliError {
    fn from(e: QuadratureError) -> Self {
        match e {
            QuadratureError::ToleranceNotMet { .. } => Self::Numerical(e.to_string()),
            _ => Self::Usage(e.to_string()),
        }
    }
}

impl From<FormfactorError> for CliError {
    fn from(e: FormfactorError) -> Self {
        match e {
            FormfactorError::Quadrature(q) => q.into(),
            FormfactorError::InvalidParameter(_) => Self::Usage(e.to_string()),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        if e.is_numerical() {
            Self::Numerical(e.to_string())
        } else {
            Self::Usage(e.to_string())
        }
    }
}

impl From<AsymptoticsError> for CliError {
    fn from(e: AsymptoticsError) -> Self {
        match e {
            AsymptoticsError::Field(f) => f.into(),
            AsymptoticsError::InvalidGrid(_)
            | AsymptoticsError::Unsorted
            | AsymptoticsError::NotCompactSupport => Self::Usage(e.to_string()),
            AsymptoticsError::NonPositive { .. }
            | AsymptoticsError::TooFewPoints { .. }
            | AsymptoticsError::NoPeaksFound
            | AsymptoticsError::DegenerateFit { .. } => Self::Numerical(e.to_string()),
        }
    }
}

impl From<BellError> for CliError {
    fn from(e: BellError) -> Self {
        match e {
            BellError::BudgetTooSmall { .. } | BellError::NonHermitianResult(_) => {
                Self::Numerical(e.to_string())
            }
            _ => Self::Usage(e.to_string()),
        }
    }
}

impl From<FransonError> for CliError {
    fn from(e: FransonError) -> Self {
        match e {
            FransonError::Field(f) => f.into(),
            FransonError::NegativeRate(_) => Self::Numerical(e.to_string()),
            _ => Self::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "entangle-lab",
    version,
    about = "Space-dependent entanglement laboratory"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Field amplitude phi(r, t) on a radial grid.
    #[command(args_override_self = true)]
    Phi(PhiArgs),
    /// Coincidence base rate R0(r1, r2, t) on a radial grid.
    #[command(args_override_self = true)]
    R0Sweep(R0SweepArgs),
    /// Log-log power-law fit of |phi(r, t)|^2 or of an input table.
    #[command(args_override_self = true)]
    DecayFit(DecayFitArgs),
    /// CHSH value with spatial weighting and a local hidden-variable baseline.
    #[command(args_override_self = true)]
    Chsh(ChshArgs),
    /// Spatial localization factor g(O1, O2), with a sweep over cube size.
    #[command(args_override_self = true)]
    GFactor(GFactorArgs),
    /// Interferometer coincidence fringe over the phase difference.
    #[command(args_override_self = true)]
    Franson(FransonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormfactorKind {
    Step,
    Gaussian,
    Bump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PacketKind {
    Product,
    Correlated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnvelopeMode {
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON file whose keys are flag names; command-line flags win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub json_out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FieldArgs {
    #[arg(long, value_enum, default_value_t = FormfactorKind::Step)]
    pub formfactor: FormfactorKind,
    /// Cutoff of the step formfactor.
    #[arg(long, default_value_t = 1.0)]
    pub cutoff: f64,
    /// Width parameter of the Gaussian formfactor.
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    /// Support of the bump formfactor.
    #[arg(long, action = clap::ArgAction::Set, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub support: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t: f64,
    /// Quadrature relative tolerance (absolute tolerance is 1% of it).
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub r_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub log_spacing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PacketArgs {
    #[arg(long, value_enum, default_value_t = PacketKind::Product)]
    pub packet: PacketKind,
    #[arg(long, action = clap::ArgAction::Set, num_args = 3, allow_negative_numbers = true)]
    pub center1: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma1: f64,
    #[arg(long, action = clap::ArgAction::Set, num_args = 3, allow_negative_numbers = true)]
    pub center2: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    /// Mean of r1 - r2 for correlated packets.
    #[arg(long, action = clap::ArgAction::Set, num_args = 3, allow_negative_numbers = true)]
    pub offset: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_rel: f64,
    #[arg(long, action = clap::ArgAction::Set, num_args = 3, allow_negative_numbers = true)]
    pub cm_center: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_cm: f64,
    /// Detector box for particle 1 (lo x y z, hi x y z); all of space if absent.
    #[arg(long, action = clap::ArgAction::Set, num_args = 6, allow_negative_numbers = true)]
    pub box1: Option<Vec<f64>>,
    #[arg(long, action = clap::ArgAction::Set, num_args = 6, allow_negative_numbers = true)]
    pub box2: Option<Vec<f64>>,
    /// Monte Carlo sample budget for correlated packets.
    #[arg(long, default_value_t = 200_000)]
    pub budget: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PhiArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct R0SweepArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Hold r2 fixed instead of sweeping r1 = r2.
    #[arg(long)]
    pub r2: Option<f64>,
    /// Put the swept radius in the r2 column.
    #[arg(long)]
    pub swap: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DecayFitArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Fit the first two columns of this CSV instead of sampling the model.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EnvelopeMode::Auto)]
    pub envelope: EnvelopeMode,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ChshArgs {
    #[command(flatten)]
    pub packet: PacketArgs,
    /// Coplanar analyzer angles a, a', b, b' in degrees.
    #[arg(long, action = clap::ArgAction::Set, num_args = 4, allow_negative_numbers = true)]
    pub angles: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100_000)]
    pub lhv_samples: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GFactorArgs {
    #[command(flatten)]
    pub packet: PacketArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FransonArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[arg(long, default_value_t = 2.0)]
    pub r1: f64,
    #[arg(long, default_value_t = 3.0)]
    pub r2: f64,
    /// Phase of the second interferometer (radians).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta2: f64,
    /// Phase samples over one full period.
    #[arg(long, default_value_t = 360)]
    pub points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

impl FieldArgs {
    pub fn formfactor(&self) -> Result<Formfactor, CliError> {
        let f = match self.formfactor {
            FormfactorKind::Step => Formfactor::step(self.cutoff),
            FormfactorKind::Gaussian => Formfactor::gaussian(self.width),
            FormfactorKind::Bump => {
                let [a, b] = self.support_or_default();
                Formfactor::bump(a, b)
            }
        };
        f.map_err(|e| CliError::Usage(format!("--formfactor {}: {e}", self.kind_str())))
    }

    fn support_or_default(&self) -> [f64; 2] {
        match self.support.as_deref() {
            Some(&[a, b]) => [a, b],
            _ => [0.5, 2.0],
        }
    }

    fn kind_str(&self) -> &'static str {
        match self.formfactor {
            FormfactorKind::Step => "step",
            FormfactorKind::Gaussian => "gaussian",
            FormfactorKind::Bump => "bump",
        }
    }

    pub fn spec(&self) -> Result<QuadratureSpec, CliError> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(CliError::Usage(format!(
                "--tol must lie in (0, 1), got {}",
                self.tol
            )));
        }
        Ok(QuadratureSpec {
            rel_tol: self.tol,
            abs_tol: 1e-2 * self.tol,
            ..QuadratureSpec::default()
        })
    }

    pub fn checked_t(&self) -> Result<f64, CliError> {
        if !self.t.is_finite() {
            return Err(CliError::Usage(format!(
                "--t must be finite, got {}",
                self.t
            )));
        }
        Ok(self.t)
    }

    fn echo(&self, m: &mut Map<String, Value>) {
        m.insert("formfactor".into(), json!(self.kind_str()));
        match self.formfactor {
            FormfactorKind::Step => m.insert("cutoff".into(), json!(self.cutoff)),
            FormfactorKind::Gaussian => m.insert("width".into(), json!(self.width)),
            FormfactorKind::Bump => m.insert("support".into(), json!(self.support_or_default())),
        };
        m.insert("t".into(), json!(self.t));
        m.insert("tol".into(), json!(self.tol));
    }
}

/// Grid defaults for a command, used where a flag is absent.
#[derive(Debug, Clone, Copy)]
pub struct GridDefaults {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

impl GridArgs {
    pub fn resolve(&self, d: GridDefaults) -> Result<RadialGrid, CliError> {
        let spacing = if self.log_spacing {
            Spacing::Log
        } else {
            Spacing::Linear
        };
        let min = self.r_min.unwrap_or(d.r_min);
        let max = self.r_max.unwrap_or(d.r_max);
        let count = self.points.unwrap_or(d.points);
        RadialGrid::new(min, max, count, spacing).map_err(|e| {
            CliError::Usage(match e {
                GridError::NonPositiveMin(v) => format!("--r-min must be positive, got {v}"),
                GridError::EmptyRange { min, max } => {
                    format!("--r-max ({max}) must be at least --r-min ({min})")
                }
                GridError::TooFewPoints(n) => format!("--points must be at least 2, got {n}"),
            })
        })
    }
}

fn echo_grid(grid: &RadialGrid, m: &mut Map<String, Value>) {
    m.insert("r-min".into(), json!(grid.min));
    m.insert("r-max".into(), json!(grid.max));
    m.insert("points".into(), json!(grid.count));
    m.insert("log-spacing".into(), json!(grid.spacing == Spacing::Log));
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

/// What a finished command produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutput {
    pub stdout: String,
}

fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
        Err(e) => Err(CliError::Usage(format!("{THREADS_ENV}: {e}"))),
    }
}

/// Runs an already parsed command, honoring the worker-thread cap.
pub fn execute(cli: Cli) -> Result<RunOutput, CliError> {
    let run = move || commands::dispatch(cli.command);
    match thread_cap()? {
        None => run(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?
            .install(run),
    }
}

/// Full entry point: config expansion, parsing, execution and reporting.
/// Returns the process exit code.
pub fn run<I>(args: I) -> i32
where
    I: IntoIterator<Item = OsString>,
{
    let args = match config::expand_args(args.into_iter().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout
                .write_all(out.stdout.as_bytes())
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return 1;
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
