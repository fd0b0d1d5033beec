//! Synthetic-bond instantaneous return, expected utility over grid strategies
//! and the first-order condition that ties optimality to zero curvature.

use rayon::prelude::*;
use serde::Serialize;

use crate::arbitrage::{return_gradient, ReturnField};
use crate::error::{Error, Result};
use crate::grid::XGrid;

/// Longest `T - s` accepted on a stochastic field, in years.
pub const MAX_STOCHASTIC_HORIZON: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityForm {
    Log,
    /// `w^(1-gamma) / (1-gamma)`.
    Power { gamma: f64 },
    /// `-exp(-a w) / a`.
    Exponential { a: f64 },
}

/// `scale * u(w) + shift` for one of the named forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilityFunction {
    pub form: UtilityForm,
    pub scale: f64,
    pub shift: f64,
}

impl UtilityFunction {
    pub fn log() -> Self {
        Self::from_form(UtilityForm::Log)
    }

    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || (gamma - 1.0).abs() < 1e-12 {
            return Err(Error::InvalidInput(format!(
                "power utility needs gamma > 0, gamma != 1 (got {gamma}); use log for gamma = 1"
            )));
        }
        Ok(Self::from_form(UtilityForm::Power { gamma }))
    }

    pub fn exponential(a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::InvalidInput(format!("exponential utility needs a > 0 (got {a})")));
        }
        Ok(Self::from_form(UtilityForm::Exponential { a }))
    }

    fn from_form(form: UtilityForm) -> Self {
        Self {
            form,
            scale: 1.0,
            shift: 0.0,
        }
    }

    /// Positive affine transform `scale * u + shift`.
    pub fn affine(self, scale: f64, shift: f64) -> Result<Self> {
        if !(scale > 0.0) || !shift.is_finite() {
            return Err(Error::InvalidInput("affine transform needs scale > 0 and finite shift".into()));
        }
        Ok(Self {
            scale: self.scale * scale,
            shift: self.shift * scale + shift,
            ..self
        })
    }

    pub fn eval(&self, w: f64) -> f64 {
        let u = match self.form {
            UtilityForm::Log => w.ln(),
            UtilityForm::Power { gamma } => w.powf(1.0 - gamma) / (1.0 - gamma),
            UtilityForm::Exponential { a } => -(-a * w).exp() / a,
        };
        self.scale * u + self.shift
    }

    /// `(u'(w), u''(w))`.
    pub fn derivatives(&self, w: f64) -> (f64, f64) {
        let (d1, d2) = match self.form {
            UtilityForm::Log => (1.0 / w, -1.0 / (w * w)),
            UtilityForm::Power { gamma } => (w.powf(-gamma), -gamma * w.powf(-gamma - 1.0)),
            UtilityForm::Exponential { a } => ((-a * w).exp(), -a * (-a * w).exp()),
        };
        (self.scale * d1, self.scale * d2)
    }

    /// Checks `u' > 0`, `u'' < 0` at `samples` points spread over `[lo, hi]`.
    pub fn check_concavity(&self, lo: f64, hi: f64, samples: usize) -> Result<()> {
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidInput(format!("evaluation range [{lo}, {hi}] must be positive")));
        }
        let n = samples.max(2);
        for i in 0..n {
            let w = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let (d1, d2) = self.derivatives(w);
            if !(d1 > 0.0) || !(d2 < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "utility is not strictly increasing and concave at w = {w} (u' = {d1:e}, u'' = {d2:e})"
                )));
            }
        }
        Ok(())
    }
}

/// `Ret^x_t = Dlog D^x_t + r^x_t` at time node `t`.
pub fn instantaneous_return<F: ReturnField + ?Sized>(field: &F, x: &[f64], t: usize) -> Result<f64> {
    let s = field.series(x)?;
    s.get(t)
        .copied()
        .ok_or_else(|| Error::InvalidInput(format!("time index {t} outside a grid of {} nodes", s.len())))
}

/// Norm of the x-gradient of the return at `(x, t)`, with step `h`.
///
/// Same differences as the curvature field, so with `h` equal to the grid
/// spacing this is the curvature component norm at that node.
pub fn foc_residual<F: ReturnField + ?Sized>(field: &F, x: &[f64], t: usize, h: f64) -> Result<f64> {
    let grad = return_gradient(field, x, h)?;
    let g = grad
        .get(t)
        .ok_or_else(|| Error::InvalidInput(format!("time index {t} outside a grid of {} nodes", grad.len())))?;
    Ok(g.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Truncation scale of the three-point time differences: largest step `dt`
/// squared times the return magnitude, plus a roundoff floor.
pub fn grid_tolerance(dt: f64, return_scale: f64) -> f64 {
    dt * dt * return_scale.abs() + 1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UtilityVerdict {
    /// Objective constant over the strategy grid.
    Flat,
    /// No interior maximum: the optimum hits the edge of the x-grid.
    ArbitrageConsistent,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    /// Coordinate sweeps per start.
    pub max_sweeps: usize,
    /// Relative value gap treated as a tie.
    pub tol: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 50,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityOptimum {
    /// Left end of each strategy step.
    pub step_times: Vec<f64>,
    /// Nominal vector held on each step.
    pub strategy: Vec<Vec<f64>>,
    pub value: f64,
    /// FOC residual at each step's `(x, t)`.
    pub foc_residuals: Vec<f64>,
    pub foc_max: f64,
    pub grid_tolerance: f64,
    pub flat: bool,
    pub on_boundary: bool,
    pub verdict: UtilityVerdict,
    pub starts: usize,
    pub sweeps: usize,
}

// Per node, per path, per step: trapezoid integral of the return over the step.
fn step_contributions<F: ReturnField + ?Sized>(
    field: &F,
    grid: &XGrid,
    i0: usize,
    i1: usize,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let times = field.times();
    grid.points()
        .par_iter()
        .map(|x| {
            let paths = field.path_series(x)?;
            Ok(paths
                .iter()
                .map(|s| {
                    (i0..i1)
                        .map(|k| 0.5 * (s[k] + s[k + 1]) * (times[k + 1] - times[k]))
                        .collect()
                })
                .collect())
        })
        .collect()
}

struct Objective<'a> {
    u: &'a UtilityFunction,
    contrib: &'a [Vec<Vec<f64>>],
    paths: usize,
    // log-wealth a single step cannot resolve
    resolution: f64,
}

impl Objective<'_> {
    fn value(&self, logs: &[f64]) -> f64 {
        logs.iter().map(|l| self.u.eval(l.exp())).sum::<f64>() / self.paths as f64
    }

    // Gains below this are ties: relative `tol` plus the step resolution in value units.
    fn tie(&self, logs: &[f64], value: f64, tol: f64) -> f64 {
        let marginal = logs
            .iter()
            .map(|l| {
                let w = l.exp();
                self.u.derivatives(w).0 * w
            })
            .sum::<f64>()
            / self.paths as f64;
        tol * (1.0 + value.abs()) + self.resolution * marginal
    }

    fn logs(&self, strategy: &[usize]) -> Vec<f64> {
        (0..self.paths)
            .map(|p| strategy.iter().enumerate().map(|(k, &n)| self.contrib[n][p][k]).sum())
            .collect()
    }

    // Value of every node on step `k`, others held.
    fn candidates(&self, logs: &[f64], strategy: &[usize], k: usize) -> Vec<f64> {
        let cur = strategy[k];
        (0..self.contrib.len())
            .into_par_iter()
            .map(|n| {
                let l: Vec<f64> = (0..self.paths)
                    .map(|p| logs[p] - self.contrib[cur][p][k] + self.contrib[n][p][k])
                    .collect();
                self.value(&l)
            })
            .collect()
    }
}

struct Ascent {
    strategy: Vec<usize>,
    value: f64,
    flat: bool,
    sweeps: usize,
}

fn ascend(obj: &Objective, mut strategy: Vec<usize>, opts: OptimizerOptions) -> Ascent {
    let mut logs = obj.logs(&strategy);
    let mut value = obj.value(&logs);
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut moved = false;
        let mut flat = true;
        for k in 0..strategy.len() {
            let cand = obj.candidates(&logs, &strategy, k);
            let tie = obj.tie(&logs, value, opts.tol);
            let (lo, hi) = cand
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            flat &= hi - lo <= tie;
            // first node attaining the max; moves only on a real gain
            let best = cand.iter().position(|&v| v == hi).unwrap();
            if hi > value + tie {
                let old = strategy[k];
                for (p, l) in logs.iter_mut().enumerate() {
                    *l += obj.contrib[best][p][k] - obj.contrib[old][p][k];
                }
                strategy[k] = best;
                value = obj.value(&logs);
                moved = true;
            }
        }
        if !moved || sweeps >= opts.max_sweeps {
            return Ascent {
                strategy,
                value,
                flat: flat && !moved,
                sweeps,
            };
        }
    }
}

// Center node and every corner of the grid.
fn start_nodes(grid: &XGrid) -> Vec<usize> {
    let shape = grid.shape();
    let mut out = vec![grid.flat_index(&shape.iter().map(|n| n / 2).collect::<Vec<_>>())];
    for c in 0..(1usize << shape.len()) {
        let idx: Vec<usize> = shape
            .iter()
            .enumerate()
            .map(|(a, n)| if c >> a & 1 == 1 { n - 1 } else { 0 })
            .collect();
        let n = grid.flat_index(&idx);
        if !out.contains(&n) {
            out.push(n);
        }
    }
    out
}

/// Maximizes the path average of `u(exp(int_s^T Ret^{x_t}_t dt))` over
/// strategies holding one x-grid node per time step of `[s, T]`.
///
/// Wealth is per unit budget at `s`. Coordinate ascent runs from the grid
/// center and every corner; distinct optima raise `NonConcaveDetected`.
pub fn maximize_expected_utility<F: ReturnField + ?Sized>(
    field: &F,
    u: &UtilityFunction,
    start: f64,
    horizon: f64,
    grid: &XGrid,
    opts: OptimizerOptions,
) -> Result<UtilityOptimum> {
    if grid.dim() != field.domain().dim() {
        return Err(Error::DimensionMismatch(format!(
            "{}-dimensional strategy grid for a {}-dimensional domain",
            grid.dim(),
            field.domain().dim()
        )));
    }
    if !(horizon > start) {
        return Err(Error::InvalidInput(format!("horizon {horizon} must exceed start {start}")));
    }
    if field.is_stochastic() && horizon - start > MAX_STOCHASTIC_HORIZON + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "stochastic utility runs are capped at T - s <= {MAX_STOCHASTIC_HORIZON} year"
        )));
    }
    let times = field.times();
    let slack = 1e-9 * (times[times.len() - 1] - times[0]).abs().max(1.0);
    let i0 = times.iter().position(|&t| t >= start - slack);
    let i1 = times.iter().rposition(|&t| t <= horizon + slack);
    let (i0, i1) = match (i0, i1) {
        (Some(a), Some(b)) if b > a => (a, b),
        _ => {
            return Err(Error::InvalidInput(format!(
                "[{start}, {horizon}] holds fewer than two time nodes of [{}, {}]",
                times[0],
                times[times.len() - 1]
            )))
        }
    };

    let contrib = step_contributions(field, grid, i0, i1)?;
    let dt = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let step_max = contrib.iter().flatten().flatten().fold(0.0f64, |m, c| m.max(c.abs()));
    let obj = Objective {
        u,
        contrib: &contrib,
        paths: contrib[0].len(),
        resolution: dt * dt * step_max,
    };
    let steps = i1 - i0;
    let runs: Vec<Ascent> = start_nodes(grid)
        .into_iter()
        .map(|n| ascend(&obj, vec![n; steps], opts))
        .collect();
    let primary = &runs[0];
    // the resolution is per step, so whole strategies tie within `steps` of it
    let slack = obj.tie(&obj.logs(&primary.strategy), primary.value, opts.tol) * steps as f64;
    if let Some(other) = runs.iter().find(|r| (r.value - primary.value).abs() > slack) {
        return Err(Error::NonConcaveDetected {
            first: primary.value,
            second: other.value,
        });
    }
    let flat = primary.flat;

    let h = grid.spacing(0);
    let points = grid.points();
    let strategy: Vec<Vec<f64>> = primary.strategy.iter().map(|&n| points[n].clone()).collect();
    let foc_residuals = strategy
        .iter()
        .enumerate()
        .map(|(k, x)| foc_residual(field, x, i0 + k, h))
        .collect::<Result<Vec<_>>>()?;
    let foc_max = foc_residuals.iter().cloned().fold(0.0, f64::max);
    let mut scale: f64 = 0.0;
    for (k, x) in strategy.iter().enumerate() {
        let s = field.series(x)?;
        scale = scale.max(s[i0 + k].abs()).max(s[i0 + k + 1].abs());
    }
    let shape = grid.shape();
    let on_boundary = primary.strategy.iter().any(|&n| {
        grid.multi_index(n)
            .iter()
            .zip(&shape)
            .any(|(&i, &len)| i == 0 || i + 1 == len)
    });
    let verdict = if flat {
        UtilityVerdict::Flat
    } else if on_boundary {
        UtilityVerdict::ArbitrageConsistent
    } else {
        UtilityVerdict::Interior
    };
    Ok(UtilityOptimum {
        step_times: times[i0..i1].to_vec(),
        strategy,
        value: primary.value,
        foc_residuals,
        foc_max,
        grid_tolerance: grid_tolerance(dt, scale),
        flat,
        on_boundary,
        verdict,
        starts: runs.len(),
        sweeps: runs.iter().map(|r| r.sweeps).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arbitrage::{curvature_field, DeterministicReturn};
    use crate::market_model::{MarketScenario, PortfolioDomain};
    use crate::numerics::linspace;

    fn scenario(g: &[f64], r: &[f64], nt: usize) -> MarketScenario {
        let times = linspace(0.0, 1.0, nt);
        let d = g.iter().map(|gj| times.iter().map(|t| (gj * t).exp()).collect()).collect();
        let rates = r.iter().map(|rj| vec![*rj; nt]).collect();
        let domain = PortfolioDomain::new(vec![(0.5, 1.5); g.len()]).unwrap();
        MarketScenario::from_paths(times, d, rates, domain).unwrap()
    }

    #[test]
    fn return_of_exponential_deflator() {
        let s = scenario(&[0.04], &[0.01], 41);
        let f = DeterministicReturn::new(&s);
        for t in [0, 20, 40] {
            assert!((instantaneous_return(&f, &[1.0], t).unwrap() - 0.05).abs() < 1e-6);
        }
    }

    #[test]
    fn foc_matches_curvature_norm_exactly() {
        let s = scenario(&[0.01, 0.03], &[0.0, 0.0], 17);
        let f = DeterministicReturn::new(&s);
        let grid = XGrid::uniform(s.domain(), 5).unwrap();
        let c = curvature_field(&f, &grid).unwrap();
        for n in 0..grid.len() {
            for t in [0, 8, 16] {
                let r = foc_residual(&f, &grid.point(n), t, grid.spacing(0)).unwrap();
                assert_eq!(r, c.component_norm(n, t));
            }
        }
    }

    #[test]
    fn foc_of_arbitrage_fixture_at_unit_portfolio() {
        let s = scenario(&[0.01, 0.03], &[0.0, 0.0], 201);
        let f = DeterministicReturn::new(&s);
        let r = foc_residual(&f, &[1.0, 1.0], 0, 1e-3).unwrap();
        // gradient (0.01 - 0.02, 0.03 - 0.02) / 2
        assert!((r - 0.01 / 2f64.sqrt()).abs() < 1e-6, "{r}");
    }

    #[test]
    fn homogeneous_market_is_flat() {
        let s = scenario(&[0.02, 0.02], &[0.01, 0.01], 17);
        let f = DeterministicReturn::new(&s);
        let grid = XGrid::uniform(s.domain(), 5).unwrap();
        let opt = maximize_expected_utility(&f, &UtilityFunction::log(), 0.0, 1.0, &grid, Default::default()).unwrap();
        assert!(opt.flat);
        assert_eq!(opt.verdict, UtilityVerdict::Flat);
        assert!(opt.foc_max < opt.grid_tolerance);
    }

    #[test]
    fn arbitrage_pushes_to_boundary() {
        let s = scenario(&[0.01, 0.03], &[0.0, 0.0], 9);
        let f = DeterministicReturn::new(&s);
        let grid = XGrid::uniform(s.domain(), 5).unwrap();
        for u in [UtilityFunction::log(), UtilityFunction::power(3.0).unwrap()] {
            let opt = maximize_expected_utility(&f, &u, 0.0, 1.0, &grid, Default::default()).unwrap();
            assert_eq!(opt.verdict, UtilityVerdict::ArbitrageConsistent);
            for x in &opt.strategy {
                assert_eq!(x, &vec![0.5, 1.5]);
            }
            assert!(opt.foc_max > opt.grid_tolerance);
        }
    }

    #[test]
    fn concavity_checks() {
        assert!(UtilityFunction::log().check_concavity(0.1, 10.0, 20).is_ok());
        assert!(UtilityFunction::power(0.0).is_err());
        assert!(UtilityFunction::exponential(-1.0).is_err());
        let u = UtilityFunction::exponential(2.0).unwrap().affine(3.0, -1.0).unwrap();
        assert!((u.eval(1.0) - (3.0 * (-(-2.0f64).exp() / 2.0) - 1.0)).abs() < 1e-15);
    }
}
