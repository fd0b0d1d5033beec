//! Gauges, market scenarios and the portfolio-level deflator, forward-rate
//! and short-rate formulas.
//!
//! A gauge pairs a deflator path `D_t` with a term structure `P_{t,t+u}`
//! stored on a rectangular grid of valuation dates times maturity offsets.
//! Portfolios are nominal vectors `x`; their deflator is `D^x = sum_j x_j D^j`
//! and their rates are the deflator-weighted averages of the asset rates.

use crate::error::{Error, Result};
use crate::numerics::{cumulative_trapezoid, derivative_at, interp_linear, is_strictly_increasing};

/// Relative size of the singularity guard on `|D^x_t|`.
pub const DEFLATOR_FLOOR_FACTOR: f64 = 1e-8;

/// Term structure `P[t_i, t_i + u_k]` on valuation rows and maturity-offset columns.
///
/// The first offset is always 0 and the first column is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TermStructure {
    offsets: Vec<f64>,
    values: Vec<f64>,
}

impl TermStructure {
    /// Builds a term structure from row-major values (`rows x offsets.len()`).
    pub fn new(offsets: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_offsets(&offsets)?;
        let cols = offsets.len();
        if values.len() % cols != 0 || values.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "term structure has {} values for {} maturity offsets",
                values.len(),
                cols
            )));
        }
        for (idx, &v) in values.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveTermStructure {
                    row: idx / cols,
                    col: idx % cols,
                    value: v,
                });
            }
        }
        for row in 0..values.len() / cols {
            let diag = values[row * cols];
            if diag != 1.0 {
                return Err(Error::InvalidGauge(format!(
                    "P[t,t] = {diag} at valuation row {row}, expected 1"
                )));
            }
        }
        Ok(Self { offsets, values })
    }

    /// Flat forward curve `P[t, t+u] = exp(-r_t u)` for each valuation row.
    pub fn flat(offsets: Vec<f64>, rates: &[f64]) -> Result<Self> {
        validate_offsets(&offsets)?;
        let mut values = Vec::with_capacity(rates.len() * offsets.len());
        for &r in rates {
            values.extend(offsets.iter().map(|&u| if u == 0.0 { 1.0 } else { (-r * u).exp() }));
        }
        Self::new(offsets, values)
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.offsets.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.offsets.len();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn max_offset(&self) -> f64 {
        *self.offsets.last().unwrap()
    }

    /// `P[t_i, t_i + u]`, linear in `u` between stored offsets.
    pub fn price(&self, i: usize, u: f64) -> Result<f64> {
        interp_linear(&self.offsets, self.row(i), u).ok_or(Error::MaturityOutOfRange {
            offset: u,
            max: self.max_offset(),
        })
    }

    /// Instantaneous forward rates of one valuation row.
    pub fn forward_row(&self, i: usize) -> Vec<f64> {
        let logs: Vec<f64> = self.row(i).iter().map(|p| p.ln()).collect();
        (0..self.offsets.len())
            .map(|k| -derivative_at(&self.offsets, &logs, k))
            .collect()
    }
}

fn validate_offsets(offsets: &[f64]) -> Result<()> {
    if offsets.len() < 2 || offsets[0] != 0.0 || !is_strictly_increasing(offsets) {
        return Err(Error::InvalidGauge(
            "maturity offsets must start at 0, be strictly increasing and have at least two nodes"
                .into(),
        ));
    }
    Ok(())
}

/// Instantaneous forward-rate surface `f[t_i, t_i + u_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSurface {
    offsets: Vec<f64>,
    values: Vec<f64>,
}

impl ForwardSurface {
    pub fn new(offsets: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_offsets(&offsets)?;
        if values.is_empty() || values.len() % offsets.len() != 0 {
            return Err(Error::DimensionMismatch(
                "forward surface values do not tile the offset grid".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("forward rates must be finite".into()));
        }
        Ok(Self { offsets, values })
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.offsets.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.offsets.len();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn rate(&self, i: usize, u: f64) -> Result<f64> {
        interp_linear(&self.offsets, self.row(i), u).ok_or(Error::MaturityOutOfRange {
            offset: u,
            max: *self.offsets.last().unwrap(),
        })
    }
}

/// `f = -d/du log P`, three-point differences in the maturity direction.
pub fn forward_from_term_structure(p: &TermStructure) -> ForwardSurface {
    let values = (0..p.rows()).flat_map(|i| p.forward_row(i)).collect();
    ForwardSurface {
        offsets: p.offsets.clone(),
        values,
    }
}

/// `P = exp(-int_0^u f)`, trapezoid quadrature; the first column is exactly 1.
pub fn term_structure_from_forward(f: &ForwardSurface) -> TermStructure {
    let mut values = Vec::with_capacity(f.values.len());
    for i in 0..f.rows() {
        let integral = cumulative_trapezoid(&f.offsets, f.row(i));
        values.push(1.0);
        values.extend(integral[1..].iter().map(|v| (-v).exp()));
    }
    TermStructure {
        offsets: f.offsets.clone(),
        values,
    }
}

/// One asset: deflator path plus term structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Gauge {
    pub deflator: Vec<f64>,
    pub term_structure: TermStructure,
}

impl Gauge {
    pub fn new(deflator: Vec<f64>, term_structure: TermStructure) -> Result<Self> {
        if deflator.len() != term_structure.rows() {
            return Err(Error::DimensionMismatch(format!(
                "deflator has {} samples, term structure {} valuation rows",
                deflator.len(),
                term_structure.rows()
            )));
        }
        if deflator.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidGauge("deflator must be finite".into()));
        }
        Ok(Self {
            deflator,
            term_structure,
        })
    }

    /// Short rate as the forward rate at the first maturity node.
    pub fn implied_short_rates(&self) -> Vec<f64> {
        (0..self.deflator.len())
            .map(|i| {
                let logs: Vec<f64> = self.term_structure.row(i).iter().map(|p| p.ln()).collect();
                -derivative_at(self.term_structure.offsets(), &logs, 0)
            })
            .collect()
    }
}

/// Axis-aligned box of admissible nominals.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioDomain {
    bounds: Vec<(f64, f64)>,
}

impl PortfolioDomain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidInput("portfolio domain needs at least one axis".into()));
        }
        for &(lo, hi) in &bounds {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::InvalidInput(format!("invalid axis bounds [{lo}, {hi}]")));
            }
        }
        Ok(Self { bounds })
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.bounds.len()
            && x.iter()
                .zip(&self.bounds)
                .all(|(v, (lo, hi))| *v >= *lo - 1e-12 && *v <= *hi + 1e-12)
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    fn vertices(&self) -> Vec<Vec<f64>> {
        let n = self.bounds.len();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|j| if mask >> j & 1 == 1 { self.bounds[j].1 } else { self.bounds[j].0 })
                    .collect()
            })
            .collect()
    }
}

/// A point in portfolio space together with a valuation-date index.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioPoint {
    pub nominals: Vec<f64>,
    pub time_index: usize,
}

/// N gauges on a shared time grid, their short rates and the portfolio domain.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketScenario {
    time_grid: Vec<f64>,
    assets: Vec<Gauge>,
    short_rates: Vec<Vec<f64>>,
    domain: PortfolioDomain,
}

impl MarketScenario {
    /// Validates shapes and rejects domains that touch the singular set `D^x = 0`.
    pub fn new(
        time_grid: Vec<f64>,
        assets: Vec<Gauge>,
        short_rates: Vec<Vec<f64>>,
        domain: PortfolioDomain,
    ) -> Result<Self> {
        if time_grid.len() < 2 || !is_strictly_increasing(&time_grid) {
            return Err(Error::InvalidInput(
                "time grid must be strictly increasing with at least two nodes".into(),
            ));
        }
        if assets.is_empty() {
            return Err(Error::InvalidInput("scenario needs at least one asset".into()));
        }
        if short_rates.len() != assets.len() || domain.dim() != assets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} assets, {} short-rate paths, {}-dimensional portfolio domain",
                assets.len(),
                short_rates.len(),
                domain.dim()
            )));
        }
        for (j, (g, r)) in assets.iter().zip(&short_rates).enumerate() {
            if g.deflator.len() != time_grid.len() || r.len() != time_grid.len() {
                return Err(Error::GridMismatch(format!(
                    "asset {j} paths do not match the {}-node time grid",
                    time_grid.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("asset {j} short rates must be finite")));
            }
        }
        let scenario = Self {
            time_grid,
            assets,
            short_rates,
            domain,
        };
        scenario.check_domain()?;
        Ok(scenario)
    }

    /// Scenario whose term structures are flat forward curves at the short rate,
    /// with maturity offsets matching the time grid's elapsed times.
    pub fn from_paths(
        time_grid: Vec<f64>,
        deflators: Vec<Vec<f64>>,
        short_rates: Vec<Vec<f64>>,
        domain: PortfolioDomain,
    ) -> Result<Self> {
        if time_grid.is_empty() {
            return Err(Error::InvalidInput("empty time grid".into()));
        }
        let t0 = time_grid[0];
        let offsets: Vec<f64> = time_grid.iter().map(|t| t - t0).collect();
        let assets = deflators
            .into_iter()
            .zip(&short_rates)
            .map(|(d, r)| {
                if r.len() != d.len() {
                    return Err(Error::GridMismatch("deflator and short-rate lengths differ".into()));
                }
                Gauge::new(d, TermStructure::flat(offsets.clone(), r)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(time_grid, assets, short_rates, domain)
    }

    // D^x is affine in x, so over a box its range is spanned by the vertices.
    fn check_domain(&self) -> Result<()> {
        let vertices = self.domain.vertices();
        for t in 0..self.time_grid.len() {
            let floor = self.deflator_floor(t);
            let vals: Vec<f64> = vertices
                .iter()
                .map(|v| self.raw_deflator(v, t))
                .collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if lo < floor && hi > -floor {
                let value = if lo.abs() < hi.abs() { lo } else { hi };
                return Err(Error::DeflatorSingular {
                    time_index: t,
                    value: if lo <= 0.0 && hi >= 0.0 { 0.0 } else { value },
                    floor,
                });
            }
        }
        Ok(())
    }

    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn assets(&self) -> &[Gauge] {
        &self.assets
    }

    pub fn asset_count(&self) -> usize {
        self.assets.len()
    }

    pub fn short_rates(&self) -> &[Vec<f64>] {
        &self.short_rates
    }

    pub fn domain(&self) -> &PortfolioDomain {
        &self.domain
    }

    pub fn deflator(&self, asset: usize, t: usize) -> f64 {
        self.assets[asset].deflator[t]
    }

    /// `1e-8 * max_j |D^j_t|`.
    pub fn deflator_floor(&self, t: usize) -> f64 {
        DEFLATOR_FLOOR_FACTOR
            * self
                .assets
                .iter()
                .map(|g| g.deflator[t].abs())
                .fold(0.0, f64::max)
    }

    fn raw_deflator(&self, x: &[f64], t: usize) -> f64 {
        x.iter()
            .zip(&self.assets)
            .map(|(xj, g)| xj * g.deflator[t])
            .sum()
    }

    fn check_point(&self, x: &[f64], t: usize) -> Result<()> {
        if x.len() != self.assets.len() {
            return Err(Error::DimensionMismatch(format!(
                "nominal vector has {} entries for {} assets",
                x.len(),
                self.assets.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("nominals must be finite".into()));
        }
        if t >= self.time_grid.len() {
            return Err(Error::InvalidInput(format!(
                "time index {t} outside grid of {} nodes",
                self.time_grid.len()
            )));
        }
        Ok(())
    }

    /// Deflator-weights `x_j D^j_t / D^x_t` together with `D^x_t`.
    pub fn weights(&self, x: &[f64], t: usize) -> Result<(f64, Vec<f64>)> {
        let dx = portfolio_deflator(self, x, t)?;
        let w = x
            .iter()
            .zip(&self.assets)
            .map(|(xj, g)| xj * g.deflator[t] / dx)
            .collect();
        Ok((dx, w))
    }
}

/// `D^x_t = sum_j x_j D^j_t`, guarded against the singular set.
pub fn portfolio_deflator(scenario: &MarketScenario, x: &[f64], t: usize) -> Result<f64> {
    scenario.check_point(x, t)?;
    let value = scenario.raw_deflator(x, t);
    let floor = scenario.deflator_floor(t);
    if value.abs() < floor || value == 0.0 {
        return Err(Error::DeflatorSingular {
            time_index: t,
            value,
            floor,
        });
    }
    Ok(value)
}

/// `r^x_t = sum_j (x_j D^j_t / D^x_t) r^j_t`.
pub fn portfolio_short_rate(scenario: &MarketScenario, x: &[f64], t: usize) -> Result<f64> {
    let (_, w) = scenario.weights(x, t)?;
    Ok(w.iter()
        .zip(&scenario.short_rates)
        .map(|(wj, r)| wj * r[t])
        .sum())
}

/// `f^x_{t,u} = sum_j (x_j D^j_t / D^x_t) f^j_{t,u}`.
pub fn portfolio_forward_rate(
    scenario: &MarketScenario,
    x: &[f64],
    t: usize,
    u: f64,
) -> Result<f64> {
    let (_, w) = scenario.weights(x, t)?;
    let mut acc = 0.0;
    for (wj, g) in w.iter().zip(&scenario.assets) {
        let ts = &g.term_structure;
        let f = interp_linear(ts.offsets(), &ts.forward_row(t), u).ok_or(
            Error::MaturityOutOfRange {
                offset: u,
                max: ts.max_offset(),
            },
        )?;
        acc += wj * f;
    }
    Ok(acc)
}

/// `P^x_{t,t+u} = exp(-int_0^u f^x_{t,h} dh)` on the union of the assets' offset grids.
pub fn portfolio_term_price(
    scenario: &MarketScenario,
    x: &[f64],
    t: usize,
    u: f64,
) -> Result<f64> {
    if u == 0.0 {
        scenario.check_point(x, t)?;
        return Ok(1.0);
    }
    let mut nodes: Vec<f64> = scenario
        .assets
        .iter()
        .flat_map(|g| g.term_structure.offsets().iter().copied())
        .filter(|&h| h < u)
        .collect();
    nodes.push(u);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let rates = nodes
        .iter()
        .map(|&h| portfolio_forward_rate(scenario, x, t, h))
        .collect::<Result<Vec<_>>>()?;
    let integral = cumulative_trapezoid(&nodes, &rates);
    Ok((-integral.last().unwrap()).exp())
}
