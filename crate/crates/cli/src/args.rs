use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "shiftshare-lens", version, about = "Shift-share designs: weights, placebo checks and correlated-random-coefficient estimators")]
pub struct Cli {
    #[command(flatten)]
    #[serde(flatten)]
    pub global: Global,
    #[command(subcommand)]
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Global {
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Which report encodings to write.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Weight locations by the panel's `weight` column.
    #[arg(long, global = true)]
    pub weighted: bool,
    /// Cap on worker threads. Results do not depend on it.
    #[arg(long, global = true, env = "SHIFTSHARE_THREADS")]
    #[serde(skip)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "subcommand")]
pub enum Command {
    /// Load a dataset and report validation errors and warnings.
    Validate(DataArgs),
    /// Build the Bartik instrument, optionally from leave-one-out or demeaned shocks.
    Instrument(InstrumentArgs),
    /// First stage, reduced form and 2SLS with location-clustered SEs.
    Regress(RegressArgs),
    /// Decomposition weights and sign diagnostics.
    Weights(WeightsArgs),
    /// Correlated-random-coefficient trends and average effects.
    Crc(CrcArgs),
    /// Debiased no-constant Bartik estimators.
    Debias(CrcArgs),
    /// Regress pre-period evolutions on a later instrument.
    Placebo(PlaceboArgs),
    /// Regress sector shocks on sector covariates and test joint significance.
    ShockTest(ShockTestArgs),
    /// Draw a synthetic dataset with known effects.
    Simulate(SimulateArgs),
    /// Monte Carlo over simulated datasets.
    Mc(McArgs),
    /// Collect prior reports into one summary.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// `location,period,d,y[,weight]`
    pub panel: PathBuf,
    /// `sector,period,shock[,location]`
    pub shocks: PathBuf,
    /// `sector,location,share[,period]`
    pub shares: PathBuf,
    #[arg(long)]
    pub sector_covariates: Option<PathBuf>,
    #[arg(long)]
    pub location_covariates: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    LogDiff,
    Diff,
    GrowthRate,
}

#[derive(Debug, Args, Serialize)]
pub struct InstrumentArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Sector × location levels (`sector,location,period,level`) over all level
    /// periods; replaces the shocks with leave-one-out shocks.
    #[arg(long)]
    pub levels: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Transform::LogDiff)]
    pub transform: Transform,
    /// Center sector shocks within each period.
    #[arg(long)]
    pub demean: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegSpec {
    None,
    Intercept,
    Fe,
}

#[derive(Debug, Args, Serialize)]
pub struct RegressArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = RegSpec::Fe)]
    pub spec: RegSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WSpec {
    Fe,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Cell,
    Gt,
    G,
}

/// Effect restriction under which the weights are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Assume {
    /// First-stage and reduced-form weights, no restriction.
    None,
    /// 2SLS weight signs with `β_{s,g,t} = β_{g,t} ≥ 0`.
    #[value(name = "bg_t")]
    BgT,
    /// 2SLS weight signs with `β_{s,g,t} = β_g ≥ 0`, `α_{g,t} = α_g`.
    Bg,
    /// 2SLS weights with a homogeneous first stage.
    B,
}

#[derive(Debug, Args, Serialize)]
pub struct WeightsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = WSpec::Fe)]
    pub spec: WSpec,
    /// Defaults to `cell` for `--assume none`, `g` for `bg`, `gt` otherwise.
    #[arg(long, value_enum)]
    pub level: Option<Level>,
    #[arg(long, value_enum, default_value_t = Assume::None)]
    pub assume: Assume,
    /// Location covariate to correlate with location-level weights (repeatable).
    #[arg(long = "covariate")]
    pub covariates: Vec<String>,
    /// `sector,variance[,period]`; adds exposure-variance weights.
    #[arg(long)]
    pub shock_variances: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Error,
    Drop,
    Winsorize,
}

#[derive(Debug, Args, Serialize)]
pub struct CrcFlags {
    #[arg(long, value_enum, default_value_t = Policy::Error)]
    pub near_zero_policy: Policy,
    /// Quantile used by `--near-zero-policy winsorize`.
    #[arg(long, default_value_t = 0.01)]
    pub winsorize_quantile: f64,
    /// `‖ΔZ_g‖²` threshold for a near-zero instrument.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Also fit the homogeneous-first-stage, additive-time variant.
    #[arg(long)]
    pub additive_time: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct CrcArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub crc: CrcFlags,
    /// Number of location-bootstrap draws (0 = none).
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct PlaceboArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Pre-period label (repeatable).
    #[arg(long = "pre", required = true)]
    pub pre: Vec<String>,
    /// Period whose instrument is used.
    #[arg(long)]
    pub instrument: String,
    /// Run even when pre-period shocks are not zero; a warning is recorded.
    #[arg(long)]
    pub allow_pre_shocks: bool,
    #[arg(long, default_value_t = 1e-10)]
    pub shock_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorWeight {
    None,
    Exposure,
}

#[derive(Debug, Args, Serialize)]
pub struct ShockTestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Period whose shocks are tested (repeatable; default all, stacked).
    #[arg(long = "period")]
    pub periods: Vec<String>,
    /// Sector covariate to include (repeatable; default all).
    #[arg(long = "covariate")]
    pub covariates: Vec<String>,
    #[arg(long, value_enum, default_value_t = SectorWeight::None)]
    pub weight_by: SectorWeight,
    /// `sector,cluster` file for clustered inference.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// JSON simulation config; defaults apply to omitted fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct McArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated estimator list; default all.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Vec<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub crc: CrcFlags,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Directories holding earlier reports.
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
}
