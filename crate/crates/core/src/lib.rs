//! Arbitrage analysis of gauge markets: curvature of the market connection,
//! spectral analysis of the connection Laplacian, pricing-kernel recovery.

pub mod arbitrage;
pub mod error;
pub mod gauge_algebra;
pub mod grid;
pub mod laplacian;
pub mod market_model;
pub mod nelson;
pub mod numerics;
pub mod scenario_io;
pub mod simulation;
pub mod utility;

pub use error::{Error, Result};

/// Tool version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
