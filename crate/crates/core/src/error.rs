use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the toolkit can report.
///
/// Variants are split into two families: input/validation failures (the data
/// could not be accepted) and estimation failures (the data is well formed but
/// an estimator is undefined on it). [`Error::is_estimation`] tells them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV in {file}: {message}")]
    Csv { file: String, message: String },
    #[error("{file}: missing required column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file}: duplicate key {key}")]
    DuplicateKey { file: String, key: String },
    #[error("{file}: non-finite value `{value}` at {coordinates}")]
    NonFinite {
        file: String,
        coordinates: String,
        value: String,
    },
    #[error("{file}: unknown {kind} `{id}`")]
    UnknownIdentifier {
        file: String,
        kind: &'static str,
        id: String,
    },
    #[error("{file}: missing cell {coordinates}")]
    MissingCell { file: String, coordinates: String },
    #[error("dataset rejected: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-positive level {value} at sector {sector}, period {period} (log transform)")]
    NonPositiveLevel {
        sector: usize,
        period: usize,
        value: f64,
    },
    #[error("excluded aggregate is zero for sector {sector}, location {location}, period {period}")]
    AllMassInOneLocation {
        sector: usize,
        location: usize,
        period: usize,
    },
    #[error("operation requires sector-level shocks, dataset carries per-location shocks")]
    PerLocationShocksUnsupported,

    #[error("regressor has no variation left after partialling out the intercept structure")]
    CollinearRegressor,
    #[error("denominator too close to zero ({value:e})")]
    WeakDenominator { value: f64 },
    #[error("shocks at pre-period are not zero (max |shock| = {max_abs:e})")]
    ShocksNotZeroAtPrePeriod { max_abs: f64 },
    #[error("covariates are rank deficient once an intercept is added")]
    RankDeficientCovariates,
    #[error("weight denominator vanishes: the instrument has no usable variation")]
    ZeroDenominator,
    #[error("level mismatch: {0}")]
    LevelMismatch(String),
    #[error("wrong specification: {0}")]
    WrongSpec(String),
    #[error("all shock variances are zero")]
    AllZeroVariance,
    #[error("instrument vector of location {location} is (near) zero")]
    DegenerateInstrument { location: usize },
    #[error("trend design sum of annihilators is singular")]
    SingularDesign,
    #[error("at least three periods (two evolutions) are required, got {evolutions} evolution(s)")]
    TooFewPeriods { evolutions: usize },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("strict identity check requested but the dataset contains noise")]
    NoiseNotZero,
}

impl Error {
    /// True for failures of an estimator on well-formed data.
    pub fn is_estimation(&self) -> bool {
        matches!(
            self,
            Error::CollinearRegressor
                | Error::WeakDenominator { .. }
                | Error::ShocksNotZeroAtPrePeriod { .. }
                | Error::RankDeficientCovariates
                | Error::ZeroDenominator
                | Error::AllZeroVariance
                | Error::DegenerateInstrument { .. }
                | Error::SingularDesign
                | Error::TooFewPeriods { .. }
                | Error::NoiseNotZero
                | Error::AllMassInOneLocation { .. }
                | Error::NonPositiveLevel { .. }
        )
    }
}
