use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "gauge-arb", version, about = "Geometric arbitrage diagnostics for gauge market models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Euler-Maruyama ensemble of the scenario's Itô model.
    Simulate(Common),
    /// Curvature of the market connection on a nominal grid.
    Curvature(Common),
    /// Zero-curvature range test at every time node.
    ZcTest(Common),
    /// Low spectrum of the connection Laplacian and the NFLVR verdict.
    Spectrum(Common),
    /// Pricing kernel and Radon-Nikodym derivative from the harmonic section.
    Kernel(Common),
    /// Expected-utility optimum over grid strategies.
    Utility(UtilityArgs),
    /// Every applicable analysis in one report.
    Report(Common),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Curvature(_) => "curvature",
            Command::ZcTest(_) => "zc-test",
            Command::Spectrum(_) => "spectrum",
            Command::Kernel(_) => "kernel",
            Command::Utility(_) => "utility",
            Command::Report(_) => "report",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::Curvature(c)
            | Command::ZcTest(c)
            | Command::Spectrum(c)
            | Command::Kernel(c)
            | Command::Report(c) => c,
            Command::Utility(u) => &u.common,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Scenario JSON document.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory for reports.
    #[arg(long, default_value = "gauge-arb-out")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Overrides the scenario's simulation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Nodes per nominal axis (and time nodes of the Laplacian).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Number of eigenpairs.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Eigensolver relative tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Kernel threshold; defaults to 1e-8 times the second eigenvalue.
    #[arg(long)]
    pub epsilon_kernel: Option<f64>,
    /// Path blocks analyzed for stochastic spectra.
    #[arg(long, default_value_t = 4)]
    pub blocks: usize,
    /// Overwrite existing reports.
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    Log,
    Power,
    Exp,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UtilityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long = "u", value_enum, default_value_t = UtilityKind::Log)]
    pub u: UtilityKind,
    /// Relative risk aversion for power utility.
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    /// Absolute risk aversion for exponential utility.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 0.0)]
    pub start: f64,
    /// End of the investment window; defaults to the last time node (capped at one year after start for ensembles).
    #[arg(long)]
    pub horizon: Option<f64>,
}
