//! JSON scenario documents: deterministic gauges, an optional Itô model with
//! simulation settings, and an optional cashflow intensity.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge_algebra::CashflowIntensity;
use crate::market_model::{Gauge, MarketScenario, PortfolioDomain, TermStructure};
use crate::simulation::ItoModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetDoc {
    pub deflator: Vec<f64>,
    pub short_rate: Vec<f64>,
    /// Row-major `P[t_i, t_i + u_k]`, one row per time node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term_structure: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maturity_offsets: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityDoc {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

/// `{"atoms": [[h, w], ...], "density": {"breakpoints": [...], "values": [...]}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityDoc {
    #[serde(default)]
    pub atoms: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityDoc>,
}

impl IntensityDoc {
    pub fn build(&self) -> Result<CashflowIntensity> {
        let atoms = self.atoms.iter().map(|a| (a[0], a[1])).collect();
        match &self.density {
            Some(d) => CashflowIntensity::piecewise_constant(atoms, &d.breakpoints, &d.values),
            None => CashflowIntensity::new(atoms, Vec::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assets: Vec<AssetDoc>,
    pub portfolio_domain: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ItoModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<IntensityDoc>,
}

impl ScenarioDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(format!("scenario JSON: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn domain(&self) -> Result<PortfolioDomain> {
        PortfolioDomain::new(self.portfolio_domain.iter().map(|b| (b[0], b[1])).collect())
    }

    pub fn has_deterministic(&self) -> bool {
        self.time_grid.is_some() && !self.assets.is_empty()
    }

    pub fn has_model(&self) -> bool {
        self.model.is_some()
    }

    /// The deterministic scenario. Assets without a term structure get a flat
    /// curve at their short rate on offsets `t - t_0`.
    pub fn market_scenario(&self) -> Result<MarketScenario> {
        let times = self
            .time_grid
            .clone()
            .filter(|_| !self.assets.is_empty())
            .ok_or_else(|| Error::ConfigInvalid("scenario has no \"time_grid\" with \"assets\"".into()))?;
        let t0 = times.first().copied().unwrap_or(0.0);
        let default_offsets: Vec<f64> = times.iter().map(|t| t - t0).collect();
        let mut gauges = Vec::with_capacity(self.assets.len());
        for (j, a) in self.assets.iter().enumerate() {
            let ts = match (&a.term_structure, &a.maturity_offsets) {
                (Some(values), Some(offsets)) => TermStructure::new(offsets.clone(), values.clone())?,
                (None, None) => TermStructure::flat(default_offsets.clone(), &a.short_rate)?,
                _ => {
                    return Err(Error::ConfigInvalid(format!(
                        "asset {j}: \"term_structure\" and \"maturity_offsets\" come together"
                    )))
                }
            };
            gauges.push(Gauge::new(a.deflator.clone(), ts)?);
        }
        let rates = self.assets.iter().map(|a| a.short_rate.clone()).collect();
        MarketScenario::new(times, gauges, rates, self.domain()?)
    }

    pub fn model(&self) -> Result<&ItoModelSpec> {
        let m = self
            .model
            .as_ref()
            .ok_or_else(|| Error::ConfigInvalid("scenario has no \"model\" block".into()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn simulation(&self) -> Result<SimulationConfig> {
        self.simulation
            .ok_or_else(|| Error::ConfigInvalid("scenario has no \"simulation\" block".into()))
    }

    pub fn intensity(&self) -> Result<Option<CashflowIntensity>> {
        self.intensity.as_ref().map(IntensityDoc::build).transpose()
    }
}
