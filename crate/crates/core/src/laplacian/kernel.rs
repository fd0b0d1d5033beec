//! Verdicts from the low spectrum, pricing-kernel extraction and
//! Radon-Nikodym derivatives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::laplacian::eigen::SpectralResult;
use crate::laplacian::operator::{ScenarioConnection, SectionGrid};
use crate::market_model::{portfolio_deflator, portfolio_short_rate};
use crate::numerics::derivative_at;

/// Default kernel threshold relative to the first nonzero eigenvalue.
pub const KERNEL_RATIO: f64 = 1e-8;
/// Cross-column spread above which the Radon-Nikodym derivative depends on x.
pub const RN_SPREAD_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NflvrVerdict {
    ArbitrageFree,
    Arbitrage,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CompletenessVerdict {
    Complete,
    Incomplete,
    /// Empty kernel: the market already fails the no-arbitrage test.
    Arbitrage,
}

/// Kernel threshold: `KERNEL_RATIO * lambda_2` from the computed spectrum.
pub fn default_epsilon(result: &SpectralResult) -> Result<f64> {
    if result.eigenvalues.len() < 2 {
        return Err(Error::InvalidInput(
            "the default kernel threshold needs k >= 2 eigenvalues; pass an explicit epsilon".into(),
        ));
    }
    Ok(KERNEL_RATIO * result.eigenvalues[1])
}

/// `ARBITRAGE_FREE` iff `lambda_min < eps`, `INCONCLUSIVE` on `[eps, 10 eps)`.
pub fn is_nflvr(result: &SpectralResult, eps: f64) -> Result<NflvrVerdict> {
    if !result.converged {
        return Err(Error::NoConvergence {
            iterations: result.iterations,
            residual: result.residuals.iter().cloned().fold(0.0, f64::max),
        });
    }
    Ok(classify(result.lambda_min(), eps))
}

pub fn classify(lambda_min: f64, eps: f64) -> NflvrVerdict {
    if lambda_min < eps {
        NflvrVerdict::ArbitrageFree
    } else if lambda_min < 10.0 * eps {
        NflvrVerdict::Inconclusive
    } else {
        NflvrVerdict::Arbitrage
    }
}

/// `COMPLETE` iff exactly one eigenvalue lies below `eps`. Only meaningful for
/// a single deterministic scenario; ensemble runs report `NotApplicable`.
pub fn is_complete(result: &SpectralResult, eps: f64) -> Result<CompletenessVerdict> {
    if !result.converged {
        return Err(Error::NoConvergence {
            iterations: result.iterations,
            residual: result.residuals.iter().cloned().fold(0.0, f64::max),
        });
    }
    Ok(match result.kernel_dim(eps) {
        0 => CompletenessVerdict::Arbitrage,
        1 => CompletenessVerdict::Complete,
        _ => CompletenessVerdict::Incomplete,
    })
}

/// Pricing kernel `beta_t = 1 / (f(t, x_ref) D^{x_ref}_t)`, normalized to `beta_0 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricingKernel {
    pub times: Vec<f64>,
    pub beta: Vec<f64>,
    pub x_ref: Vec<f64>,
    /// Largest `|Dlog(beta D^x) + r^x|` over the sampled check nodes.
    pub check_residual: f64,
    pub check_nodes: usize,
}

// f with its sign fixed to positive; errors when it changes sign.
fn positive_section(f: &SectionGrid) -> Result<Vec<f64>> {
    let min = f.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = f.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min > 0.0 {
        Ok(f.values.clone())
    } else if max < 0.0 {
        Ok(f.values.iter().map(|v| -v).collect())
    } else {
        Err(Error::SignChange { min, max })
    }
}

/// Extracts `beta` from a harmonic section and checks the kernel equation at
/// `check_nodes` pseudo-random grid nodes (fixed seed).
pub fn extract_pricing_kernel(
    f: &SectionGrid,
    conn: &ScenarioConnection,
    x_ref: &[f64],
    check_nodes: usize,
) -> Result<PricingKernel> {
    let values = positive_section(f)?;
    let pos = SectionGrid {
        values,
        ..f.clone()
    };
    let scenario = conn.scenario();
    let nt = pos.times.len();
    let mut beta = Vec::with_capacity(nt);
    for k in 0..nt {
        let fv = pos.interpolate(k, x_ref)?;
        let d = portfolio_deflator(scenario, x_ref, conn.scenario_index(k))?;
        beta.push(1.0 / (fv * d));
    }
    let b0 = beta[0];
    beta.iter_mut().for_each(|b| *b /= b0);

    // Dlog(beta D^x) + r^x at random (t, x) nodes, classical three-point differences in t.
    let mut rng = ChaCha8Rng::seed_from_u64(0xbe7a);
    let log_beta: Vec<f64> = beta.iter().map(|b| b.ln()).collect();
    let pts = pos.grid.points();
    let mut worst: f64 = 0.0;
    for _ in 0..check_nodes {
        let k = rng.random_range(0..nt);
        let x = &pts[rng.random_range(0..pts.len())];
        let logs = (0..nt)
            .map(|i| {
                portfolio_deflator(scenario, x, conn.scenario_index(i)).map(|d| log_beta[i] + d.abs().ln())
            })
            .collect::<Result<Vec<_>>>()?;
        let r = portfolio_short_rate(scenario, x, conn.scenario_index(k))?;
        worst = worst.max((derivative_at(&pos.times, &logs, k) + r).abs());
    }
    Ok(PricingKernel {
        times: pos.times.clone(),
        beta,
        x_ref: x_ref.to_vec(),
        check_residual: worst,
        check_nodes,
    })
}

/// `beta_t / beta_0` from every grid column with its cross-column spread.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadonNikodym {
    pub time: f64,
    pub value: f64,
    pub relative_spread: f64,
}

/// `dP*/dP` at time node `k`: `(D^x_0 / D^x_t) (f_0(x) / f_t(x))`, averaged over
/// x-grid columns. Errors with `XDependence` if the columns disagree.
pub fn radon_nikodym(f: &SectionGrid, conn: &ScenarioConnection, k: usize) -> Result<RadonNikodym> {
    let values = positive_section(f)?;
    let scenario = conn.scenario();
    let nx = f.grid.len();
    let t0 = conn.scenario_index(0);
    let tk = conn.scenario_index(k);
    let mut samples = Vec::with_capacity(nx);
    for (m, x) in f.grid.points().iter().enumerate() {
        let d0 = portfolio_deflator(scenario, x, t0)?;
        let dk = portfolio_deflator(scenario, x, tk)?;
        samples.push(d0 / dk * values[m] / values[k * nx + m]);
    }
    let mean = samples.iter().sum::<f64>() / nx as f64;
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / mean.abs();
    if spread > RN_SPREAD_TOL {
        return Err(Error::XDependence {
            time_index: k,
            spread,
        });
    }
    Ok(RadonNikodym {
        time: f.times[k],
        value: mean,
        relative_spread: spread,
    })
}

/// Radon-Nikodym derivative at every time node.
pub fn radon_nikodym_series(f: &SectionGrid, conn: &ScenarioConnection) -> Result<Vec<RadonNikodym>> {
    (0..f.times.len()).map(|k| radon_nikodym(f, conn, k)).collect()
}
