//! Euler-Maruyama ensembles for the Itô market model
//!
//! `dS/S = alpha dt + sigma dW`, `dr = a dt + b dW`
//!
//! with pathwise quadratic-covariation and self-financing checks.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::interp_linear;

/// Paths with `|S|` beyond this bound are reported as exploded.
pub const EXPLOSION_BOUND: f64 = 1e12;

/// Named built-in coefficient. `Affine` reads `c0 + ct * t + cs * state`,
/// where the state is the entry's own asset value (or short rate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    Constant { value: f64 },
    Affine { c0: f64, ct: f64, cs: f64 },
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl Coefficient {
    pub fn constant(value: f64) -> Self {
        Coefficient::Constant { value }
    }

    pub fn eval(&self, t: f64, state: f64) -> f64 {
        match self {
            Coefficient::Constant { value } => *value,
            Coefficient::Affine { c0, ct, cs } => c0 + ct * t + cs * state,
            Coefficient::Table { times, values } => {
                if t <= times[0] {
                    values[0]
                } else if t >= *times.last().unwrap() {
                    *values.last().unwrap()
                } else {
                    interp_linear(times, values, t).unwrap()
                }
            }
        }
    }

    /// True when the coefficient does not depend on the state.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, Coefficient::Affine { cs, .. } if *cs != 0.0)
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Coefficient::Constant { value } => value.is_finite(),
            Coefficient::Affine { c0, ct, cs } => c0.is_finite() && ct.is_finite() && cs.is_finite(),
            Coefficient::Table { times, values } => {
                !times.is_empty()
                    && times.len() == values.len()
                    && crate::numerics::is_strictly_increasing(times)
                    && values.iter().all(|v| v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid coefficient {self:?}")))
        }
    }
}

/// Coefficients of the Itô model. Matrices are row-major `N x K`.
///
/// The short-rate noise `b` is driven by the same `K` Brownian motions as the assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItoModelSpec {
    pub assets: usize,
    pub brownian_dim: usize,
    pub drift: Vec<Coefficient>,
    pub volatility: Vec<Coefficient>,
    pub rate_drift: Vec<Coefficient>,
    pub rate_volatility: Vec<Coefficient>,
    pub initial_values: Vec<f64>,
    pub initial_rates: Vec<f64>,
}

impl ItoModelSpec {
    /// Geometric Brownian motions with constant coefficients and constant short rates.
    pub fn constant(alpha: &[f64], sigma: &[Vec<f64>], rates: &[f64], s0: &[f64]) -> Result<Self> {
        let n = alpha.len();
        let k = sigma.first().map_or(0, |r| r.len());
        let spec = Self {
            assets: n,
            brownian_dim: k,
            drift: alpha.iter().map(|&a| Coefficient::constant(a)).collect(),
            volatility: sigma
                .iter()
                .flat_map(|row| row.iter().map(|&s| Coefficient::constant(s)))
                .collect(),
            rate_drift: vec![Coefficient::constant(0.0); n],
            rate_volatility: vec![Coefficient::constant(0.0); n * k],
            initial_values: s0.to_vec(),
            initial_rates: rates.to_vec(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, k) = (self.assets, self.brownian_dim);
        if n == 0 || k == 0 {
            return Err(Error::InvalidInput("model needs at least one asset and one Brownian dimension".into()));
        }
        let shapes = [
            ("drift", self.drift.len(), n),
            ("volatility", self.volatility.len(), n * k),
            ("rate_drift", self.rate_drift.len(), n),
            ("rate_volatility", self.rate_volatility.len(), n * k),
            ("initial_values", self.initial_values.len(), n),
            ("initial_rates", self.initial_rates.len(), n),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::DimensionMismatch(format!("{name} has {got} entries, expected {want}")));
            }
        }
        for c in self
            .drift
            .iter()
            .chain(&self.volatility)
            .chain(&self.rate_drift)
            .chain(&self.rate_volatility)
        {
            c.validate()?;
        }
        if self
            .initial_values
            .iter()
            .chain(&self.initial_rates)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput("initial values must be finite".into()));
        }
        Ok(())
    }

    pub fn alpha(&self, t: f64, s: &[f64]) -> Vec<f64> {
        self.drift.iter().zip(s).map(|(c, &v)| c.eval(t, v)).collect()
    }

    /// Row-major `N x K` volatility.
    pub fn sigma(&self, t: f64, s: &[f64]) -> Vec<f64> {
        let k = self.brownian_dim;
        self.volatility
            .iter()
            .enumerate()
            .map(|(idx, c)| c.eval(t, s[idx / k]))
            .collect()
    }

    pub fn rate_alpha(&self, t: f64, r: &[f64]) -> Vec<f64> {
        self.rate_drift.iter().zip(r).map(|(c, &v)| c.eval(t, v)).collect()
    }

    pub fn rate_sigma(&self, t: f64, r: &[f64]) -> Vec<f64> {
        let k = self.brownian_dim;
        self.rate_volatility
            .iter()
            .enumerate()
            .map(|(idx, c)| c.eval(t, r[idx / k]))
            .collect()
    }

    /// True when no coefficient depends on the state, so sigma is deterministic.
    pub fn has_deterministic_volatility(&self) -> bool {
        self.volatility.iter().all(Coefficient::is_deterministic)
    }
}

/// Which process of an ensemble to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Asset(usize),
    Rate(usize),
}

/// Simulated asset values, short rates and the Brownian increments that drove them.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    times: Vec<f64>,
    paths: usize,
    assets: usize,
    brownian_dim: usize,
    seed: u64,
    values: Vec<f64>,
    rates: Vec<f64>,
    increments: Vec<f64>,
}

impl PathEnsemble {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn path_count(&self) -> usize {
        self.paths
    }

    pub fn asset_count(&self) -> usize {
        self.assets
    }

    pub fn brownian_dim(&self) -> usize {
        self.brownian_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn node(&self, path: usize, step: usize) -> usize {
        (path * self.times.len() + step) * self.assets
    }

    /// Asset values `S^j` at `(path, step)`.
    pub fn values_at(&self, path: usize, step: usize) -> &[f64] {
        let i = self.node(path, step);
        &self.values[i..i + self.assets]
    }

    pub fn rates_at(&self, path: usize, step: usize) -> &[f64] {
        let i = self.node(path, step);
        &self.rates[i..i + self.assets]
    }

    /// Brownian increment over `[t_step, t_{step+1}]`.
    pub fn increment(&self, path: usize, step: usize) -> &[f64] {
        let i = (path * self.steps() + step) * self.brownian_dim;
        &self.increments[i..i + self.brownian_dim]
    }

    /// One path of one component.
    pub fn component_path(&self, path: usize, c: Component) -> Vec<f64> {
        (0..self.times.len())
            .map(|k| match c {
                Component::Asset(j) => self.values_at(path, k)[j],
                Component::Rate(j) => self.rates_at(path, k)[j],
            })
            .collect()
    }

    /// Cumulative Brownian path `W^d` of one path.
    pub fn brownian_path(&self, path: usize, d: usize) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.times.len());
        let mut acc = 0.0;
        w.push(0.0);
        for k in 0..self.steps() {
            acc += self.increment(path, k)[d];
            w.push(acc);
        }
        w
    }

    /// CSV with columns `path,step,time,asset_1..N,rate_1..N`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.assets;
        let mut header = String::from("path,step,time");
        for j in 1..=n {
            header.push_str(&format!(",asset_{j}"));
        }
        for j in 1..=n {
            header.push_str(&format!(",rate_{j}"));
        }
        writeln!(out, "{header}")?;
        for p in 0..self.paths {
            for (k, t) in self.times.iter().enumerate() {
                let mut line = format!("{p},{k},{t}");
                for v in self.values_at(p, k).iter().chain(self.rates_at(p, k)) {
                    line.push_str(&format!(",{v}"));
                }
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }
}

// The generator for (seed, path, step) is positioned independently of every
// other (path, step), so paths do not depend on scheduling order.
fn normals(seed: u64, path: usize, step: usize, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng.set_word_pos((step as u128) << 16);
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

fn euler_step(
    spec: &ItoModelSpec,
    t: f64,
    dt: f64,
    s: &[f64],
    r: &[f64],
    dw: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let k = spec.brownian_dim;
    let alpha = spec.alpha(t, s);
    let sigma = spec.sigma(t, s);
    let a = spec.rate_alpha(t, r);
    let b = spec.rate_sigma(t, r);
    let mut s_next = Vec::with_capacity(s.len());
    let mut r_next = Vec::with_capacity(r.len());
    for j in 0..s.len() {
        let noise: f64 = (0..k).map(|d| sigma[j * k + d] * dw[d]).sum();
        s_next.push(s[j] + s[j] * (alpha[j] * dt + noise));
        let rnoise: f64 = (0..k).map(|d| b[j * k + d] * dw[d]).sum();
        r_next.push(r[j] + a[j] * dt + rnoise);
    }
    (s_next, r_next)
}

struct SimulatedPath {
    values: Vec<f64>,
    rates: Vec<f64>,
    increments: Vec<f64>,
}

fn simulate_path(
    spec: &ItoModelSpec,
    times: &[f64],
    seed: u64,
    path: usize,
) -> Result<SimulatedPath> {
    let steps = times.len() - 1;
    let (n, k) = (spec.assets, spec.brownian_dim);
    let mut values = Vec::with_capacity(times.len() * n);
    let mut rates = Vec::with_capacity(times.len() * n);
    let mut increments = vec![0.0; steps * k];
    let mut s = spec.initial_values.clone();
    let mut r = spec.initial_rates.clone();
    values.extend_from_slice(&s);
    rates.extend_from_slice(&r);
    for step in 0..steps {
        let dt = times[step + 1] - times[step];
        let dw = &mut increments[step * k..(step + 1) * k];
        normals(seed, path, step, dw);
        let sd = dt.sqrt();
        dw.iter_mut().for_each(|v| *v *= sd);
        let (s_next, r_next) = euler_step(spec, times[step], dt, &s, &r, dw);
        if let Some(&bad) = s_next
            .iter()
            .chain(&r_next)
            .find(|v| !v.is_finite() || v.abs() > EXPLOSION_BOUND)
        {
            return Err(Error::ExplodedPath {
                path,
                step: step + 1,
                value: bad.abs(),
            });
        }
        s = s_next;
        r = r_next;
        values.extend_from_slice(&s);
        rates.extend_from_slice(&r);
    }
    Ok(SimulatedPath {
        values,
        rates,
        increments,
    })
}

/// Euler-Maruyama ensemble on a uniform grid of `steps` steps over `[0, horizon]`.
pub fn simulate(
    spec: &ItoModelSpec,
    horizon: f64,
    steps: usize,
    paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    spec.validate()?;
    if steps < 2 || paths < 1 {
        return Err(Error::InvalidInput(format!(
            "simulation needs steps >= 2 and paths >= 1 (got {steps}, {paths})"
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!("horizon {horizon} must be positive")));
    }
    let times = crate::numerics::linspace(0.0, horizon, steps + 1);
    let simulated = (0..paths)
        .into_par_iter()
        .map(|p| simulate_path(spec, &times, seed, p))
        .collect::<Vec<_>>();
    let mut values = Vec::with_capacity(paths * times.len() * spec.assets);
    let mut rates = Vec::with_capacity(values.capacity());
    let mut increments = Vec::with_capacity(paths * steps * spec.brownian_dim);
    for sp in simulated {
        let sp = sp?;
        values.extend(sp.values);
        rates.extend(sp.rates);
        increments.extend(sp.increments);
    }
    Ok(PathEnsemble {
        times,
        paths,
        assets: spec.assets,
        brownian_dim: spec.brownian_dim,
        seed,
        values,
        rates,
        increments,
    })
}

/// Largest deviation between stored paths and a re-run of the scheme on the
/// stored increments; zero when the ensemble is self-consistent.
pub fn replay_residual(spec: &ItoModelSpec, ensemble: &PathEnsemble) -> f64 {
    let mut worst: f64 = 0.0;
    let times = ensemble.times();
    for p in 0..ensemble.path_count() {
        let mut s = ensemble.values_at(p, 0).to_vec();
        let mut r = ensemble.rates_at(p, 0).to_vec();
        for k in 0..ensemble.steps() {
            let dt = times[k + 1] - times[k];
            let (sn, rn) = euler_step(spec, times[k], dt, &s, &r, ensemble.increment(p, k));
            for (a, b) in sn.iter().zip(ensemble.values_at(p, k + 1)) {
                worst = worst.max((a - b).abs());
            }
            for (a, b) in rn.iter().zip(ensemble.rates_at(p, k + 1)) {
                worst = worst.max((a - b).abs());
            }
            s = sn;
            r = rn;
        }
    }
    worst
}

/// `<X, Y>_{t_k} = sum_{i<k} dX_i dY_i`.
pub fn quadratic_covariation(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::GridMismatch(format!(
            "paths of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    if !x.is_empty() {
        out.push(0.0);
    }
    for i in 1..x.len() {
        acc += (x[i] - x[i - 1]) * (y[i] - y[i - 1]);
        out.push(acc);
    }
    Ok(out)
}

/// Sup over steps of `|Dx . D + 1/2 d<x, D>/dt|` for a strategy `x` and deflators `D`.
///
/// `x[j]` and `d[j]` are the paths of asset `j` on `times`. The mean derivative
/// is the step quotient evaluated against the midpoint deflator.
pub fn self_financing_residual(times: &[f64], x: &[Vec<f64>], d: &[Vec<f64>]) -> Result<f64> {
    if x.len() != d.len() {
        return Err(Error::GridMismatch(format!(
            "{} strategy components for {} deflators",
            x.len(),
            d.len()
        )));
    }
    if x.iter().chain(d).any(|p| p.len() != times.len()) || times.len() < 2 {
        return Err(Error::GridMismatch("strategy and deflator paths must share the time grid".into()));
    }
    let mut worst: f64 = 0.0;
    for k in 0..times.len() - 1 {
        let dt = times[k + 1] - times[k];
        let mut rho = 0.0;
        for (xj, dj) in x.iter().zip(d) {
            let dx = xj[k + 1] - xj[k];
            let dd = dj[k + 1] - dj[k];
            rho += dx * 0.5 * (dj[k] + dj[k + 1]) + 0.5 * dx * dd;
        }
        worst = worst.max((rho / dt).abs());
    }
    Ok(worst)
}
