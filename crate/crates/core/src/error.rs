use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the analysis pipeline.
///
/// Every variant maps to a module-qualified code (see [`Error::code`]) so the
/// CLI and the C ABI can surface a stable identifier next to the message.
#[derive(Debug, Error)]
pub enum Error {
    #[error("portfolio deflator {value:e} at time index {time_index} is below the singularity floor {floor:e}")]
    DeflatorSingular {
        time_index: usize,
        value: f64,
        floor: f64,
    },

    #[error("maturity offset {offset} outside stored range [0, {max}]")]
    MaturityOutOfRange { offset: f64, max: f64 },

    #[error("term structure value {value} at ({row}, {col}) is not strictly positive")]
    NonPositiveTermStructure { row: usize, col: usize, value: f64 },

    #[error("invalid gauge: {0}")]
    InvalidGauge(String),

    #[error("gauge transform denominator {value:e} at time index {time_index} is singular")]
    TransformSingular { time_index: usize, value: f64 },

    #[error("numeraire deflator {value} at time index {time_index} is not strictly positive")]
    NumeraireNotPositive { time_index: usize, value: f64 },

    #[error("path {path} exploded at step {step} (|S| = {value:e})")]
    ExplodedPath { path: usize, step: usize, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("portfolio volatility {value:e} vanishes at path {path}, step {step}")]
    VanishingVolatility { path: usize, step: usize, value: f64 },

    #[error("section changes sign (min {min:e}, max {max:e}); not a pricing kernel candidate")]
    SignChange { min: f64, max: f64 },

    #[error("Radon-Nikodym derivative depends on x: relative spread {spread:e} at time index {time_index}")]
    XDependence { time_index: usize, spread: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("eigensolver did not converge after {iterations} iterations (max residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("coordinate ascent found distinct local optima {first} and {second}")]
    NonConcaveDetected { first: f64, second: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable, module-qualified identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DeflatorSingular { .. } => "market_model.deflator_singular",
            Error::MaturityOutOfRange { .. } => "market_model.maturity_out_of_range",
            Error::NonPositiveTermStructure { .. } => "market_model.non_positive_term_structure",
            Error::InvalidGauge(_) => "market_model.invalid_gauge",
            Error::TransformSingular { .. } => "gauge_algebra.transform_singular",
            Error::NumeraireNotPositive { .. } => "gauge_algebra.numeraire_not_positive",
            Error::ExplodedPath { .. } => "simulation.exploded_path",
            Error::GridMismatch(_) => "simulation.grid_mismatch",
            Error::DimensionMismatch(_) => "arbitrage.dimension_mismatch",
            Error::InsufficientSamples(_) => "nelson.insufficient_samples",
            Error::VanishingVolatility { .. } => "arbitrage.vanishing_volatility",
            Error::SignChange { .. } => "laplacian.sign_change",
            Error::XDependence { .. } => "laplacian.x_dependence",
            Error::NotApplicable(_) => "laplacian.not_applicable",
            Error::NoConvergence { .. } => "laplacian.no_convergence",
            Error::NonConcaveDetected { .. } => "utility.non_concave_detected",
            Error::Factorization(_) => "laplacian.factorization",
            Error::InvalidInput(_) => "core.invalid_input",
            Error::ConfigInvalid(_) => "cli.config_invalid",
            Error::Io { .. } => "cli.io_error",
        }
    }

    /// True for errors caused by the run configuration rather than the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::ConfigInvalid(_) | Error::Io { .. } | Error::InvalidInput(_)
        )
    }
}
