//! Connection Laplacian on the cashflow bundle: discretization, low spectrum,
//! NFLVR and completeness verdicts, pricing kernels.

pub mod eigen;
pub mod kernel;
pub mod operator;
pub mod sparse;

use rayon::prelude::*;
use serde::Serialize;

use crate::arbitrage::StochasticReturn;
use crate::error::{Error, Result};
use crate::grid::XGrid;
use crate::market_model::MarketScenario;

pub use eigen::{smallest_eigenpairs, EigenOptions, LaplacianProblem, SpectralResult};
pub use kernel::{
    classify, default_epsilon, extract_pricing_kernel, is_complete, is_nflvr, radon_nikodym,
    radon_nikodym_series, CompletenessVerdict, NflvrVerdict, PricingKernel, RadonNikodym,
};
pub use operator::{
    assemble_covariant, assemble_laplacian, subsample, Connection, CovariantOperator, DeflatedConnection,
    ScenarioConnection, SectionGrid,
};

/// Default nodes per nominal axis.
pub const DEFAULT_GRID: usize = 33;

/// Grid and solver settings of a spectral run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumConfig {
    pub grid_nodes: usize,
    /// Time nodes; `None` takes `min(grid_nodes, scenario nodes)`.
    pub time_nodes: Option<usize>,
    pub eigen: EigenOptions,
    /// Kernel threshold; `None` uses [`default_epsilon`].
    pub epsilon_kernel: Option<f64>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            grid_nodes: DEFAULT_GRID,
            time_nodes: None,
            eigen: EigenOptions::default(),
            epsilon_kernel: None,
        }
    }
}

impl SpectrumConfig {
    fn time_nodes_for(&self, available: usize) -> usize {
        self.time_nodes.unwrap_or(self.grid_nodes).min(available)
    }
}

/// Outcome of a spectral analysis of one deterministic scenario.
#[derive(Debug, Clone)]
pub struct ScenarioSpectrum<'a> {
    pub connection: ScenarioConnection<'a>,
    pub problem: LaplacianProblem,
    pub result: SpectralResult,
    pub epsilon_kernel: f64,
    pub verdict: NflvrVerdict,
    pub kernel_dim: usize,
}

/// Discretizes, solves and classifies one deterministic scenario.
pub fn analyze_scenario<'a>(scenario: &'a MarketScenario, cfg: &SpectrumConfig) -> Result<ScenarioSpectrum<'a>> {
    let grid = XGrid::uniform(scenario.domain(), cfg.grid_nodes)?;
    let nt = cfg.time_nodes_for(scenario.time_grid().len());
    let connection = ScenarioConnection::new(scenario, Some(nt))?;
    let problem = LaplacianProblem::new(&connection, &grid)?;
    let result = smallest_eigenpairs(&problem, cfg.eigen)?;
    let epsilon_kernel = match cfg.epsilon_kernel {
        Some(e) => e,
        None => default_epsilon(&result)?,
    };
    let verdict = is_nflvr(&result, epsilon_kernel)?;
    let kernel_dim = result.kernel_dim(epsilon_kernel);
    Ok(ScenarioSpectrum {
        connection,
        problem,
        result,
        epsilon_kernel,
        verdict,
        kernel_dim,
    })
}

/// Spectrum of one sampled-path block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockSpectrum {
    pub path: usize,
    pub lambda: Vec<f64>,
    pub epsilon_kernel: f64,
    pub verdict: NflvrVerdict,
    pub kernel_dim: usize,
}

/// Block-diagonal analysis of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSpectrum {
    pub blocks: Vec<BlockSpectrum>,
    pub verdict: NflvrVerdict,
}

/// Aggregate verdict: arbitrage in any block wins, then inconclusive.
pub fn aggregate(verdicts: &[NflvrVerdict]) -> NflvrVerdict {
    if verdicts.contains(&NflvrVerdict::Arbitrage) {
        NflvrVerdict::Arbitrage
    } else if verdicts.contains(&NflvrVerdict::Inconclusive) {
        NflvrVerdict::Inconclusive
    } else {
        NflvrVerdict::ArbitrageFree
    }
}

/// One Laplacian block per sampled path (the first `blocks` paths), acting on
/// deflated sections with the path's return samples as the time coefficient.
pub fn analyze_ensemble(field: &StochasticReturn, cfg: &SpectrumConfig, blocks: usize) -> Result<EnsembleSpectrum> {
    let ensemble = field.ensemble;
    let blocks = blocks.min(ensemble.path_count());
    if blocks == 0 {
        return Err(Error::InvalidInput("need at least one path block".into()));
    }
    let grid = XGrid::uniform(&field.domain, cfg.grid_nodes)?;
    let idx = subsample(ensemble.times().len(), Some(cfg.time_nodes_for(ensemble.times().len())))?;
    let times: Vec<f64> = idx.iter().map(|&i| ensemble.times()[i]).collect();
    let samples = grid
        .points()
        .par_iter()
        .map(|x| field.path_returns(x).map(|r| r.per_path))
        .collect::<Result<Vec<_>>>()?;
    let nx = grid.len();
    let results = (0..blocks)
        .map(|p| {
            let mut returns = vec![0.0; idx.len() * nx];
            for (k, &i) in idx.iter().enumerate() {
                for m in 0..nx {
                    returns[k * nx + m] = samples[m][p][i];
                }
            }
            let conn = DeflatedConnection {
                times: times.clone(),
                nodes: nx,
                returns,
            };
            let problem = LaplacianProblem::new(&conn, &grid)?;
            let result = smallest_eigenpairs(&problem, cfg.eigen)?;
            let eps = match cfg.epsilon_kernel {
                Some(e) => e,
                None => default_epsilon(&result)?,
            };
            Ok(BlockSpectrum {
                path: p,
                verdict: is_nflvr(&result, eps)?,
                kernel_dim: result.kernel_dim(eps),
                lambda: result.eigenvalues,
                epsilon_kernel: eps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = aggregate(&results.iter().map(|b| b.verdict).collect::<Vec<_>>());
    Ok(EnsembleSpectrum {
        blocks: results,
        verdict,
    })
}

/// Completeness is decided per deterministic scenario only.
pub fn is_complete_ensemble(_spectrum: &EnsembleSpectrum) -> Result<CompletenessVerdict> {
    Err(Error::NotApplicable(
        "completeness needs the kernel multiplicity across scenarios, which per-path blocks do not resolve".into(),
    ))
}
