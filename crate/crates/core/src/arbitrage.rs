//! Curvature of the market connection, the zero-curvature range condition,
//! the market price of risk and Novikov diagnostics.
//!
//! Curvature is built from the return field `s(x, t) = Dlog D^x_t + r^x_t`,
//! with `R_j(x, t) = d s / d x_j` (reported with fibre factor 1).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::XGrid;
use crate::market_model::{
    portfolio_deflator, portfolio_short_rate, MarketScenario, PortfolioDomain, DEFLATOR_FLOOR_FACTOR,
};
use crate::nelson::{mean_derivative, NelsonConfig, PathSet};
use crate::numerics::{derivative_at, grid_derivative};
use crate::simulation::{ItoModelSpec, PathEnsemble};

/// Synthetic-bond return `s(x, t)` over a time grid.
pub trait ReturnField: Sync {
    fn domain(&self) -> &PortfolioDomain;
    fn times(&self) -> &[f64];
    /// `s(x, t_k)` for every time node `k`.
    fn series(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Per-path samples of `s(x, t_k)`; a deterministic field has one path.
    fn path_series(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(vec![self.series(x)?])
    }

    fn is_stochastic(&self) -> bool {
        false
    }
}

/// Classical time derivative of `log|D^x|` on a deterministic scenario.
#[derive(Debug, Clone, Copy)]
pub struct DeterministicReturn<'a> {
    pub scenario: &'a MarketScenario,
}

impl<'a> DeterministicReturn<'a> {
    pub fn new(scenario: &'a MarketScenario) -> Self {
        Self { scenario }
    }
}

impl ReturnField for DeterministicReturn<'_> {
    fn domain(&self) -> &PortfolioDomain {
        self.scenario.domain()
    }

    fn times(&self) -> &[f64] {
        self.scenario.time_grid()
    }

    fn series(&self, x: &[f64]) -> Result<Vec<f64>> {
        let times = self.scenario.time_grid();
        let logs = (0..times.len())
            .map(|t| portfolio_deflator(self.scenario, x, t).map(|d| d.abs().ln()))
            .collect::<Result<Vec<_>>>()?;
        let dlog = grid_derivative(times, &logs);
        dlog.into_iter()
            .enumerate()
            .map(|(t, d)| Ok(d + portfolio_short_rate(self.scenario, x, t)?))
            .collect()
    }
}

/// Ensemble-based return field: deflators are the simulated asset values, the
/// mean derivative of `log|D^x|` is estimated by binned Nelson quotients.
#[derive(Debug, Clone)]
pub struct StochasticReturn<'a> {
    pub ensemble: &'a PathEnsemble,
    pub domain: PortfolioDomain,
    pub nelson: NelsonConfig,
}

/// Per-path return samples `s_omega(x, t)` and their ensemble average.
#[derive(Debug, Clone, PartialEq)]
pub struct PathReturns {
    pub per_path: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

impl<'a> StochasticReturn<'a> {
    pub fn new(ensemble: &'a PathEnsemble, domain: PortfolioDomain, nelson: NelsonConfig) -> Result<Self> {
        if domain.dim() != ensemble.asset_count() {
            return Err(Error::DimensionMismatch(format!(
                "{}-dimensional domain for {} simulated assets",
                domain.dim(),
                ensemble.asset_count()
            )));
        }
        Ok(Self {
            ensemble,
            domain,
            nelson,
        })
    }

    fn portfolio_paths(&self, x: &[f64]) -> Result<(PathSet, Vec<Vec<f64>>)> {
        let e = self.ensemble;
        if x.len() != e.asset_count() {
            return Err(Error::DimensionMismatch(format!(
                "nominal vector has {} entries for {} assets",
                x.len(),
                e.asset_count()
            )));
        }
        let mut logs = Vec::with_capacity(e.path_count());
        let mut rates = Vec::with_capacity(e.path_count());
        for p in 0..e.path_count() {
            let mut lp = Vec::with_capacity(e.times().len());
            let mut rp = Vec::with_capacity(e.times().len());
            for k in 0..e.times().len() {
                let s = e.values_at(p, k);
                let r = e.rates_at(p, k);
                let dx: f64 = x.iter().zip(s).map(|(a, b)| a * b).sum();
                let floor = DEFLATOR_FLOOR_FACTOR * s.iter().map(|v| v.abs()).fold(0.0, f64::max);
                if dx.abs() < floor || dx == 0.0 {
                    return Err(Error::DeflatorSingular {
                        time_index: k,
                        value: dx,
                        floor,
                    });
                }
                lp.push(dx.abs().ln());
                rp.push(x.iter().zip(s).zip(r).map(|((a, b), c)| a * b * c).sum::<f64>() / dx);
            }
            logs.push(lp);
            rates.push(rp);
        }
        Ok((PathSet::new(e.times().to_vec(), logs)?, rates))
    }

    /// Per-path samples `s_omega(x, t)`: the binned estimate at the path's
    /// state plus the path's portfolio short rate.
    pub fn path_returns(&self, x: &[f64]) -> Result<PathReturns> {
        let (set, rates) = self.portfolio_paths(x)?;
        let est = mean_derivative(&set, self.nelson);
        let times = set.times().len();
        let mut per_path = vec![vec![0.0; times]; set.paths().len()];
        let mut mean = vec![0.0; times];
        for k in 0..times {
            let usable: Vec<_> = est.slices[k].iter().filter(|b| b.usable).collect();
            if usable.is_empty() {
                return Err(Error::InsufficientSamples(format!(
                    "no state bin with at least {} samples at time index {k}",
                    self.nelson.min_bin_count
                )));
            }
            let n: usize = usable.iter().map(|b| b.count).sum();
            let drift: f64 = usable.iter().map(|b| b.value * b.count as f64).sum::<f64>() / n as f64;
            let rate: f64 = rates.iter().map(|r| r[k]).sum::<f64>() / rates.len() as f64;
            mean[k] = drift + rate;
            for (p, path) in set.paths().iter().enumerate() {
                per_path[p][k] = est.at(k, path[k]).unwrap().0 + rates[p][k];
            }
        }
        Ok(PathReturns { per_path, mean })
    }
}

impl ReturnField for StochasticReturn<'_> {
    fn domain(&self) -> &PortfolioDomain {
        &self.domain
    }

    fn times(&self) -> &[f64] {
        self.ensemble.times()
    }

    /// Average over usable bins of the binned estimate plus the mean short rate.
    fn series(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.path_returns(x)?.mean)
    }

    fn path_series(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.path_returns(x)?.per_path)
    }

    fn is_stochastic(&self) -> bool {
        true
    }
}

/// `d s / d x_j` at every time node, by three-point differences of step `h`.
///
/// Centered when `x +- h e_j` stays inside the domain, second-order one-sided
/// pointing inwards otherwise. Returned as `grad[t][j]`.
pub fn return_gradient<F: ReturnField + ?Sized>(field: &F, x: &[f64], h: f64) -> Result<Vec<Vec<f64>>> {
    let bounds = field.domain().bounds();
    if x.len() != bounds.len() {
        return Err(Error::DimensionMismatch(format!(
            "nominal vector has {} entries for a {}-dimensional domain",
            x.len(),
            bounds.len()
        )));
    }
    let tol = 1e-9 * h;
    let center = field.series(x)?;
    let mut grad = vec![vec![0.0; x.len()]; center.len()];
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        let shifted = |d: f64| {
            let mut y = x.to_vec();
            y[j] += d;
            field.series(&y)
        };
        let (nodes, at, samples) = if x[j] - h >= lo - tol && x[j] + h <= hi + tol {
            ([-h, 0.0, h], 1, [shifted(-h)?, center.clone(), shifted(h)?])
        } else if x[j] - h < lo - tol {
            ([0.0, h, 2.0 * h], 0, [center.clone(), shifted(h)?, shifted(2.0 * h)?])
        } else {
            ([-2.0 * h, -h, 0.0], 2, [shifted(-2.0 * h)?, shifted(-h)?, center.clone()])
        };
        for (t, g) in grad.iter_mut().enumerate() {
            let vals = [samples[0][t], samples[1][t], samples[2][t]];
            g[j] = derivative_at(&nodes, &vals, at);
        }
    }
    Ok(grad)
}

/// `R_j(x, t)` on every node of an x-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    pub grid: XGrid,
    pub times: Vec<f64>,
    /// `components[node][t][j]`.
    pub components: Vec<Vec<Vec<f64>>>,
}

impl CurvatureField {
    /// Euclidean norm of the components at one node and time.
    pub fn component_norm(&self, node: usize, t: usize) -> f64 {
        self.components[node][t].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute component over the grid.
    pub fn sup_norm(&self) -> f64 {
        self.components
            .iter()
            .flatten()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// Largest absolute component at time node `t`.
    pub fn sup_norm_at(&self, t: usize) -> f64 {
        self.components
            .iter()
            .flat_map(|n| n[t].iter())
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// Evaluates the curvature on `grid`; the x-step of the differences is the grid spacing.
pub fn curvature_field<F: ReturnField + ?Sized>(field: &F, grid: &XGrid) -> Result<CurvatureField> {
    let h: Vec<f64> = (0..grid.dim()).map(|a| grid.spacing(a)).collect();
    if h.windows(2).any(|w| (w[0] - w[1]).abs() > 1e-12 * w[0].abs()) {
        return Err(Error::InvalidInput("curvature grids need equal spacing on every axis".into()));
    }
    let components = (0..grid.len())
        .into_par_iter()
        .map(|n| return_gradient(field, &grid.point(n), h[0]))
        .collect::<Result<Vec<_>>>()?;
    Ok(CurvatureField {
        grid: grid.clone(),
        times: field.times().to_vec(),
        components,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ZcVerdict {
    Zc,
    NotZc,
}

/// Range-condition diagnostics at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RangeTestReport {
    pub residual: f64,
    pub tolerance: f64,
    pub market_price_of_risk: Vec<f64>,
    pub rank: usize,
    pub rank_deficient: bool,
    pub verdict: ZcVerdict,
}

/// Rank tolerance relative to the largest singular value.
pub const RANK_TOL: f64 = 1e-10;
/// ZC tolerance relative to `|v|` (or to the input sizes when `v` cancels).
pub const ZC_TOL: f64 = 1e-6;

/// Least-squares solution of `sigma lambda = v` with its residual norm.
///
/// `sigma` is row-major `N x K`. Rank-deficient systems get the minimum-norm solution.
pub fn market_price_of_risk(
    alpha: &[f64],
    sigma: &[f64],
    r: &[f64],
    bracket_correction: &[f64],
) -> Result<RangeTestReport> {
    let n = alpha.len();
    if n == 0 || r.len() != n || bracket_correction.len() != n || sigma.is_empty() || sigma.len() % n != 0 {
        return Err(Error::DimensionMismatch(format!(
            "alpha {}, r {}, correction {}, sigma {} entries",
            n,
            r.len(),
            bracket_correction.len(),
            sigma.len()
        )));
    }
    let k = sigma.len() / n;
    let v = DVector::from_iterator(
        n,
        (0..n).map(|j| alpha[j] - 0.5 * bracket_correction[j] + r[j]),
    );
    let s = DMatrix::from_row_slice(n, k, sigma);
    let svd = s.svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = RANK_TOL * smax;
    let mut projected = DVector::zeros(n);
    let mut lambda = DVector::zeros(k);
    let mut rank = 0;
    for (i, &sv) in svd.singular_values.iter().enumerate() {
        if sv > cut && sv > 0.0 {
            rank += 1;
            let ui = u.column(i);
            let c = ui.dot(&v);
            projected += ui * c;
            lambda += vt.row(i).transpose() * (c / sv);
        }
    }
    let residual = (&v - projected).norm();
    // relative to |v|, floored by the input sizes so cancellation in v does not
    // shrink the tolerance below roundoff
    let norm = |a: &[f64]| a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = v.norm().max(norm(alpha) + norm(r) + 0.5 * norm(bracket_correction));
    let tolerance = ZC_TOL * scale;
    Ok(RangeTestReport {
        residual,
        tolerance,
        market_price_of_risk: lambda.iter().copied().collect(),
        rank,
        rank_deficient: rank < n.min(k),
        verdict: if residual <= tolerance { ZcVerdict::Zc } else { ZcVerdict::NotZc },
    })
}

/// Tests `alpha - correction/2 + r in Range(sigma)`.
pub fn zc_range_test(
    alpha: &[f64],
    sigma: &[f64],
    r: &[f64],
    bracket_correction: &[f64],
) -> Result<RangeTestReport> {
    market_price_of_risk(alpha, sigma, r, bracket_correction)
}

/// Componentwise bracket rate `c_j(t_k) = sum_d E[d sigma_jd dW_d] / dt`,
/// zero for state-independent volatilities.
pub fn bracket_correction(spec: &ItoModelSpec, ensemble: &PathEnsemble) -> Vec<Vec<f64>> {
    let (n, k) = (spec.assets, spec.brownian_dim);
    let times = ensemble.times();
    let mut out = vec![vec![0.0; n]; times.len()];
    if spec.has_deterministic_volatility() {
        return out;
    }
    for (step, row) in out.iter_mut().enumerate().take(ensemble.steps()) {
        let dt = times[step + 1] - times[step];
        for p in 0..ensemble.path_count() {
            let s0 = spec.sigma(times[step], ensemble.values_at(p, step));
            let s1 = spec.sigma(times[step + 1], ensemble.values_at(p, step + 1));
            let dw = ensemble.increment(p, step);
            for j in 0..n {
                row[j] += (0..k).map(|d| (s1[j * k + d] - s0[j * k + d]) * dw[d]).sum::<f64>();
            }
        }
        row.iter_mut()
            .for_each(|c| *c /= ensemble.path_count() as f64 * dt);
    }
    if times.len() >= 2 {
        out[times.len() - 1] = out[times.len() - 2].clone();
    }
    out
}

/// Range test at every time node of an Itô model. Coefficients are evaluated
/// at the ensemble-average state and short rates.
pub fn zc_series(spec: &ItoModelSpec, ensemble: &PathEnsemble) -> Result<Vec<RangeTestReport>> {
    let correction = bracket_correction(spec, ensemble);
    let m = ensemble.path_count() as f64;
    (0..ensemble.times().len())
        .map(|k| {
            let t = ensemble.times()[k];
            let mut s = vec![0.0; spec.assets];
            let mut r = vec![0.0; spec.assets];
            for p in 0..ensemble.path_count() {
                for j in 0..spec.assets {
                    s[j] += ensemble.values_at(p, k)[j] / m;
                    r[j] += ensemble.rates_at(p, k)[j] / m;
                }
            }
            zc_range_test(&spec.alpha(t, &s), &spec.sigma(t, &s), &r, &correction[k])
        })
        .collect()
}

/// Range test for a scenario given only by paths: `alpha = d log D / dt`, `sigma = 0`.
pub fn zc_series_deterministic(scenario: &MarketScenario) -> Result<Vec<RangeTestReport>> {
    let times = scenario.time_grid();
    let n = scenario.asset_count();
    let mut alpha = vec![vec![0.0; n]; times.len()];
    for (j, g) in scenario.assets().iter().enumerate() {
        if let Some((t, &d)) = g.deflator.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
            return Err(Error::DeflatorSingular {
                time_index: t,
                value: d,
                floor: 0.0,
            });
        }
        let logs: Vec<f64> = g.deflator.iter().map(|d| d.ln()).collect();
        for (t, v) in grid_derivative(times, &logs).into_iter().enumerate() {
            alpha[t][j] = v;
        }
    }
    (0..times.len())
        .map(|t| {
            let r: Vec<f64> = scenario.short_rates().iter().map(|p| p[t]).collect();
            zc_range_test(&alpha[t], &vec![0.0; n], &r, &vec![0.0; n])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NovikovVerdict {
    ConsistentWithFinite,
    Diverging,
}

/// Monte Carlo estimate of `E[exp(int 1/2 (alpha^x / |sigma^x|)^2 du)]` with tail diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NovikovReport {
    pub estimate: f64,
    pub stderr: f64,
    pub paths: usize,
    /// Hill estimate of the tail index of the sampled exponentials; `None` when
    /// the top order statistics coincide (no detectable tail).
    pub tail_index: Option<f64>,
    /// Slope of `log max` against `log M` over the sample sizes M/4, M/2, M.
    pub log_max_growth: f64,
    pub verdict: NovikovVerdict,
}

/// Novikov expectation for the portfolio `x` along the ensemble paths.
pub fn novikov_diagnostic(spec: &ItoModelSpec, x: &[f64], ensemble: &PathEnsemble) -> Result<NovikovReport> {
    let (n, k) = (spec.assets, spec.brownian_dim);
    if x.len() != n || ensemble.asset_count() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} nominals, {} model assets, {} simulated assets",
            x.len(),
            n,
            ensemble.asset_count()
        )));
    }
    let times = ensemble.times();
    let exponents = (0..ensemble.path_count())
        .into_par_iter()
        .map(|p| {
            let mut acc = 0.0;
            for step in 0..ensemble.steps() {
                let t = times[step];
                let s = ensemble.values_at(p, step);
                let dx: f64 = x.iter().zip(s).map(|(a, b)| a * b).sum();
                if dx == 0.0 {
                    return Err(Error::DeflatorSingular {
                        time_index: step,
                        value: dx,
                        floor: 0.0,
                    });
                }
                let w: Vec<f64> = x.iter().zip(s).map(|(a, b)| a * b / dx).collect();
                let alpha = spec.alpha(t, s);
                let sigma = spec.sigma(t, s);
                let ax: f64 = w.iter().zip(&alpha).map(|(a, b)| a * b).sum();
                let sx = (0..k)
                    .map(|d| (0..n).map(|j| w[j] * sigma[j * k + d]).sum::<f64>().powi(2))
                    .sum::<f64>()
                    .sqrt();
                if ax == 0.0 {
                    continue;
                }
                if sx < 1e-10 {
                    return Err(Error::VanishingVolatility {
                        path: p,
                        step,
                        value: sx,
                    });
                }
                acc += 0.5 * (ax / sx).powi(2) * (times[step + 1] - t);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    let z: Vec<f64> = exponents.iter().map(|e| e.exp()).collect();
    let m = z.len() as f64;
    let estimate = z.iter().sum::<f64>() / m;
    let var = if z.len() > 1 {
        z.iter().map(|v| (v - estimate).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };

    let mut logs: Vec<f64> = exponents.clone();
    logs.sort_by(|a, b| b.total_cmp(a));
    let top = ((m.sqrt()) as usize).clamp(1, logs.len().saturating_sub(1).max(1));
    let tail_index = if logs.len() > top {
        let xi = logs[..top].iter().map(|l| l - logs[top]).sum::<f64>() / top as f64;
        (xi > 1e-12).then(|| 1.0 / xi)
    } else {
        None
    };

    let sizes: Vec<usize> = [4, 2, 1]
        .iter()
        .map(|d| (exponents.len() / d).max(1))
        .collect();
    let maxima: Vec<f64> = sizes
        .iter()
        .map(|&s| exponents[..s].iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let log_max_growth = if sizes[0] < sizes[2] {
        let lx: Vec<f64> = sizes.iter().map(|&s| (s as f64).ln()).collect();
        let mx = lx.iter().sum::<f64>() / 3.0;
        let my = maxima.iter().sum::<f64>() / 3.0;
        let sxy: f64 = lx.iter().zip(&maxima).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
        sxy / sxx
    } else {
        0.0
    };
    // A tail index at or below 1 means the sampled exponentials have no finite mean.
    let verdict = match tail_index {
        Some(a) if a <= 1.0 => NovikovVerdict::Diverging,
        _ if !estimate.is_finite() => NovikovVerdict::Diverging,
        _ => NovikovVerdict::ConsistentWithFinite,
    };
    Ok(NovikovReport {
        estimate,
        stderr: (var / m).sqrt(),
        paths: z.len(),
        tail_index,
        log_max_growth,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linspace;
    use crate::simulation::simulate;

    fn exp_scenario(g: &[f64], r: &[f64], n: usize) -> MarketScenario {
        let times = linspace(0.0, 1.0, n);
        let d = g
            .iter()
            .map(|gj| times.iter().map(|t| (gj * t).exp()).collect())
            .collect();
        let rates = r.iter().map(|rj| vec![*rj; n]).collect();
        let dom = PortfolioDomain::new(vec![(0.5, 1.5); g.len()]).unwrap();
        MarketScenario::from_paths(times, d, rates, dom).unwrap()
    }

    #[test]
    fn identical_gauges_have_zero_curvature() {
        let s = exp_scenario(&[0.04, 0.04], &[0.01, 0.01], 21);
        let grid = XGrid::uniform(s.domain(), 5).unwrap();
        let c = curvature_field(&DeterministicReturn::new(&s), &grid).unwrap();
        assert!(c.sup_norm() < 1e-12);
    }

    #[test]
    fn distinct_growth_has_curvature() {
        let s = exp_scenario(&[0.01, 0.03], &[0.0, 0.0], 41);
        let grid = XGrid::uniform(s.domain(), 5).unwrap();
        let c = curvature_field(&DeterministicReturn::new(&s), &grid).unwrap();
        assert!(c.sup_norm() >= 0.004, "{}", c.sup_norm());
        // d/dx1 of log(x1 e^{0.01t} + x2 e^{0.03t}) at t=0, x=(1,1): (0.01 - 0.02)/2
        let center = grid.flat_index(&[2, 2]);
        assert!((c.components[center][0][0] + 0.005).abs() < 1e-4);
    }

    #[test]
    fn pricing_kernel_rate_gives_zero_curvature() {
        let times = linspace(0.0, 2.0, 41);
        let beta = |t: f64| 1.0 + 0.3 * t * t;
        let dbeta = |t: f64| 0.6 * t;
        let d: Vec<f64> = times.iter().map(|t| (0.05 * t).exp()).collect();
        let r: Vec<f64> = times.iter().map(|&t| -(dbeta(t) / beta(t) + 0.05)).collect();
        let s = MarketScenario::from_paths(
            times,
            vec![d],
            vec![r],
            PortfolioDomain::new(vec![(0.5, 1.5)]).unwrap(),
        )
        .unwrap();
        let grid = XGrid::uniform(s.domain(), 9).unwrap();
        let c = curvature_field(&DeterministicReturn::new(&s), &grid).unwrap();
        assert!(c.sup_norm() < 1e-10, "{}", c.sup_norm());
    }

    #[test]
    fn range_examples() {
        let rep = zc_range_test(&[0.05, 0.06], &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!(rep.residual < 1e-15);
        let rep = zc_range_test(&[0.05, 0.05], &[1.0, 0.0, 1.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!(rep.residual < 1e-15);
        assert_eq!(rep.verdict, ZcVerdict::Zc);
        let rep = zc_range_test(&[0.05, 0.06], &[1.0, 0.0, 1.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((rep.residual - 0.01 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(rep.verdict, ZcVerdict::NotZc);
        assert!(rep.rank_deficient);
        assert!(zc_range_test(&[0.05, 0.0], &[1.0, 0.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn market_price_of_risk_examples() {
        let rep = market_price_of_risk(&[0.05, 0.1], &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((rep.market_price_of_risk[0] - 0.05).abs() < 1e-15);
        assert!((rep.market_price_of_risk[1] - 0.1).abs() < 1e-15);
        let rep = market_price_of_risk(&[0.05], &[0.2], &[0.01], &[0.0]).unwrap();
        assert!((rep.market_price_of_risk[0] - 0.3).abs() < 1e-14);
        // minimum-norm solution of [[1,1]] lambda = 0.2
        let rep = market_price_of_risk(&[0.2], &[1.0, 1.0], &[0.0], &[0.0]).unwrap();
        assert!((rep.market_price_of_risk[0] - 0.1).abs() < 1e-15);
        let rep = market_price_of_risk(&[0.05, 0.05], &[1.0, 1.0, 1.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!(rep.rank_deficient);
    }

    #[test]
    fn novikov_examples() {
        let zero = ItoModelSpec::constant(&[0.0], &[vec![0.2]], &[0.0], &[1.0]).unwrap();
        let e = simulate(&zero, 1.0, 50, 100, 1).unwrap();
        assert_eq!(novikov_diagnostic(&zero, &[1.0], &e).unwrap().estimate, 1.0);

        let det = ItoModelSpec::constant(&[0.05], &[vec![0.2]], &[0.0], &[1.0]).unwrap();
        let e = simulate(&det, 1.0, 50, 100, 1).unwrap();
        let rep = novikov_diagnostic(&det, &[1.0], &e).unwrap();
        assert!((rep.estimate - 0.03125f64.exp()).abs() < 1e-12);
        assert_eq!(rep.verdict, NovikovVerdict::ConsistentWithFinite);

        let flat = ItoModelSpec::constant(&[0.05], &[vec![0.0]], &[0.0], &[1.0]).unwrap();
        let e = simulate(&flat, 1.0, 10, 5, 1).unwrap();
        assert!(matches!(
            novikov_diagnostic(&flat, &[1.0], &e),
            Err(Error::VanishingVolatility { .. })
        ));
    }

    #[test]
    fn deterministic_zc_series() {
        let s = exp_scenario(&[0.05], &[-0.05], 11);
        let reps = zc_series_deterministic(&s).unwrap();
        assert!(reps.iter().all(|r| r.verdict == ZcVerdict::Zc && r.residual < 1e-3));
        let s = exp_scenario(&[0.01, 0.03], &[0.0, 0.0], 11);
        let reps = zc_series_deterministic(&s).unwrap();
        assert!(reps.iter().all(|r| r.verdict == ZcVerdict::NotZc));
    }
}
