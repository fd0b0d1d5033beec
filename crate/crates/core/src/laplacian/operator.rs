//! Discrete covariant derivative on a (t, x) tensor grid and the connection
//! Laplacian `Delta = G^T W G`.
//!
//! Rows of `G` live on grid edges. An edge from node `a` to its neighbour `b`
//! along direction `d` with spacing `h` carries
//!
//! `(f_b - f_a) / h + K_d(mid) (f_a + f_b) / 2`,
//!
//! which is second-order accurate at the edge midpoint and has no
//! checkerboard null space. Boundary edges need no ghost nodes: the natural
//! boundary condition of the quadratic form is the Neumann condition.

use crate::error::{Error, Result};
use crate::grid::XGrid;
use crate::laplacian::sparse::Csr;
use crate::market_model::{portfolio_deflator, portfolio_short_rate, MarketScenario};

/// Connection coefficients `K_0` (time) and `K_j` (nominal axis `j`).
pub trait Connection: Sync {
    /// Time nodes of the section grid.
    fn times(&self) -> &[f64];
    /// `K_0` at x-node `node` (coordinates `x`) and time node `k`.
    fn time_coeff(&self, node: usize, x: &[f64], k: usize) -> Result<f64>;
    /// `K_j` at the point `x` (an x-edge midpoint) and time node `k`.
    fn space_coeff(&self, j: usize, x: &[f64], k: usize) -> Result<f64>;
}

/// `K_0 = -r^x_t`, `K_j = D^j_t / D^x_t` from a deterministic scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConnection<'a> {
    scenario: &'a MarketScenario,
    indices: Vec<usize>,
    times: Vec<f64>,
}

impl<'a> ScenarioConnection<'a> {
    /// Uses every `time_nodes`-th scenario node (evenly spread, endpoints kept);
    /// `None` keeps the full time grid.
    pub fn new(scenario: &'a MarketScenario, time_nodes: Option<usize>) -> Result<Self> {
        let indices = subsample(scenario.time_grid().len(), time_nodes)?;
        let times = indices.iter().map(|&i| scenario.time_grid()[i]).collect();
        Ok(Self {
            scenario,
            indices,
            times,
        })
    }

    /// Scenario time index behind section time node `k`.
    pub fn scenario_index(&self, k: usize) -> usize {
        self.indices[k]
    }

    pub fn scenario(&self) -> &MarketScenario {
        self.scenario
    }
}

/// Evenly spread indices into a grid of `len` nodes.
pub fn subsample(len: usize, nodes: Option<usize>) -> Result<Vec<usize>> {
    let n = nodes.unwrap_or(len);
    if n < 2 || n > len {
        return Err(Error::InvalidInput(format!(
            "cannot take {n} time nodes from a grid of {len}"
        )));
    }
    let mut idx: Vec<usize> = (0..n)
        .map(|i| ((i as f64) * (len - 1) as f64 / (n - 1) as f64).round() as usize)
        .collect();
    idx.dedup();
    Ok(idx)
}

impl Connection for ScenarioConnection<'_> {
    fn times(&self) -> &[f64] {
        &self.times
    }

    fn time_coeff(&self, _node: usize, x: &[f64], k: usize) -> Result<f64> {
        Ok(-portfolio_short_rate(self.scenario, x, self.indices[k])?)
    }

    fn space_coeff(&self, j: usize, x: &[f64], k: usize) -> Result<f64> {
        let t = self.indices[k];
        Ok(self.scenario.deflator(j, t) / portfolio_deflator(self.scenario, x, t)?)
    }
}

/// Connection acting on deflated sections `g = f D^x`: `K_0 = -s(x, t)`, `K_j = 0`.
///
/// `returns[k * nodes + node]` holds `s` on the grid nodes.
#[derive(Debug, Clone)]
pub struct DeflatedConnection {
    pub times: Vec<f64>,
    pub nodes: usize,
    pub returns: Vec<f64>,
}

impl Connection for DeflatedConnection {
    fn times(&self) -> &[f64] {
        &self.times
    }

    fn time_coeff(&self, node: usize, _x: &[f64], k: usize) -> Result<f64> {
        Ok(-self.returns[k * self.nodes + node])
    }

    fn space_coeff(&self, _j: usize, _x: &[f64], _k: usize) -> Result<f64> {
        Ok(0.0)
    }
}

/// Scalar section values on the (time x nominal) grid, time slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionGrid {
    pub times: Vec<f64>,
    pub grid: XGrid,
    pub values: Vec<f64>,
}

impl SectionGrid {
    pub fn from_fn<F: Fn(f64, &[f64]) -> f64>(times: &[f64], grid: &XGrid, f: F) -> Self {
        let pts = grid.points();
        let values = times
            .iter()
            .flat_map(|&t| pts.iter().map(move |x| (t, x)))
            .map(|(t, x)| f(t, x))
            .collect();
        Self {
            times: times.to_vec(),
            grid: grid.clone(),
            values,
        }
    }

    pub fn value(&self, k: usize, node: usize) -> f64 {
        self.values[k * self.grid.len() + node]
    }

    /// Multilinear interpolation in `x` at time node `k`.
    pub fn interpolate(&self, k: usize, x: &[f64]) -> Result<f64> {
        let axes = self.grid.axes();
        if x.len() != axes.len() {
            return Err(Error::DimensionMismatch("interpolation point dimension".into()));
        }
        let mut cell = Vec::with_capacity(x.len());
        for (a, &xa) in axes.iter().zip(x) {
            let n = a.len();
            let tol = 1e-12 * (1.0 + a[n - 1].abs());
            if xa < a[0] - tol || xa > a[n - 1] + tol {
                return Err(Error::InvalidInput(format!(
                    "point {xa} outside grid axis [{}, {}]",
                    a[0],
                    a[n - 1]
                )));
            }
            let i = a.partition_point(|&v| v <= xa).clamp(1, n - 1) - 1;
            let w = ((xa - a[i]) / (a[i + 1] - a[i])).clamp(0.0, 1.0);
            cell.push((i, w));
        }
        let mut acc = 0.0;
        for corner in 0..1usize << x.len() {
            let mut weight = 1.0;
            let mut idx = Vec::with_capacity(x.len());
            for (a, &(i, w)) in cell.iter().enumerate() {
                if corner >> a & 1 == 1 {
                    weight *= w;
                    idx.push(i + 1);
                } else {
                    weight *= 1.0 - w;
                    idx.push(i);
                }
            }
            if weight != 0.0 {
                acc += weight * self.value(k, self.grid.flat_index(&idx));
            }
        }
        Ok(acc)
    }

    /// CSV with columns `time,x_1..x_N,value`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = String::from("time");
        for j in 1..=self.grid.dim() {
            header.push_str(&format!(",x_{j}"));
        }
        writeln!(out, "{header},value")?;
        let pts = self.grid.points();
        for (k, t) in self.times.iter().enumerate() {
            for (m, x) in pts.iter().enumerate() {
                let mut line = format!("{t}");
                for v in x {
                    line.push_str(&format!(",{v}"));
                }
                writeln!(out, "{line},{}", self.value(k, m))?;
            }
        }
        Ok(())
    }
}

/// Direction of a row of the covariant operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeDirection {
    Time,
    Nominal(usize),
}

/// Stacked directional derivatives with their quadrature weights.
#[derive(Debug, Clone)]
pub struct CovariantOperator {
    pub times: Vec<f64>,
    pub grid: XGrid,
    /// `rows x nodes`, two entries per row.
    pub matrix: Csr,
    /// Edge measure of each row.
    pub weights: Vec<f64>,
    /// Connection coefficient at each edge midpoint.
    pub edge_coeffs: Vec<f64>,
    pub directions: Vec<EdgeDirection>,
    /// Trapezoid measure of each node.
    pub mass: Vec<f64>,
}

// Trapezoid dual widths of a 1-D grid.
fn dual_widths(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { nodes[i] - nodes[i - 1] } else { 0.0 };
            let right = if i + 1 < n { nodes[i + 1] - nodes[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Assembles the edge rows of the covariant derivative.
pub fn assemble_covariant<C: Connection + ?Sized>(conn: &C, grid: &XGrid) -> Result<CovariantOperator> {
    let times = conn.times().to_vec();
    if times.len() < 2 {
        return Err(Error::InvalidInput("section grids need at least two time nodes".into()));
    }
    let nx = grid.len();
    let nt = times.len();
    let n = nx * nt;
    let pts = grid.points();
    let shape = grid.shape();
    let dual_t = dual_widths(&times);
    let dual_x: Vec<Vec<f64>> = grid.axes().iter().map(|a| dual_widths(a)).collect();
    let node_dual = |m: usize, skip: Option<usize>| -> f64 {
        grid.multi_index(m)
            .iter()
            .enumerate()
            .filter(|(a, _)| Some(*a) != skip)
            .map(|(a, &i)| dual_x[a][i])
            .product()
    };

    let mut k0 = vec![0.0; n];
    for k in 0..nt {
        for (m, x) in pts.iter().enumerate() {
            let v = conn.time_coeff(m, x, k)?;
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite time coefficient at ({k}, {m})")));
            }
            k0[k * nx + m] = v;
        }
    }

    let mut triplets = Vec::new();
    let mut weights = Vec::new();
    let mut coeffs = Vec::new();
    let mut directions = Vec::new();
    let mut push_edge = |a: usize, b: usize, h: f64, kmid: f64, w: f64, dir: EdgeDirection| {
        let r = weights.len();
        triplets.push((r, a, -1.0 / h + 0.5 * kmid));
        triplets.push((r, b, 1.0 / h + 0.5 * kmid));
        weights.push(w);
        coeffs.push(kmid);
        directions.push(dir);
    };

    for k in 0..nt - 1 {
        let h = times[k + 1] - times[k];
        for m in 0..nx {
            let (a, b) = (k * nx + m, (k + 1) * nx + m);
            let kmid = 0.5 * (k0[a] + k0[b]);
            push_edge(a, b, h, kmid, h * node_dual(m, None), EdgeDirection::Time);
        }
    }
    for axis in 0..grid.dim() {
        let stride: usize = shape[axis + 1..].iter().product();
        let coords = &grid.axes()[axis];
        for k in 0..nt {
            for m in 0..nx {
                let i = grid.multi_index(m)[axis];
                if i + 1 == shape[axis] {
                    continue;
                }
                let h = coords[i + 1] - coords[i];
                let mut mid = pts[m].clone();
                mid[axis] = 0.5 * (coords[i] + coords[i + 1]);
                let kmid = conn.space_coeff(axis, &mid, k)?;
                if !kmid.is_finite() {
                    return Err(Error::InvalidInput(format!("non-finite connection coefficient at ({k}, {m})")));
                }
                let w = h * dual_t[k] * node_dual(m, Some(axis));
                push_edge(k * nx + m, k * nx + m + stride, h, kmid, w, EdgeDirection::Nominal(axis));
            }
        }
    }

    let mass = (0..n)
        .map(|i| dual_t[i / nx] * node_dual(i % nx, None))
        .collect();
    let rows = weights.len();
    Ok(CovariantOperator {
        times,
        grid: grid.clone(),
        matrix: Csr::from_triplets(rows, n, &triplets),
        weights,
        edge_coeffs: coeffs,
        directions,
        mass,
    })
}

impl CovariantOperator {
    pub fn nodes(&self) -> usize {
        self.matrix.ncols
    }

    /// Row values `(G f)_e`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.matrix.matvec(f)
    }

    /// `sum_e w_e (G f)_e^2`.
    pub fn energy(&self, f: &[f64]) -> f64 {
        self.apply(f)
            .iter()
            .zip(&self.weights)
            .map(|(g, w)| w * g * g)
            .sum()
    }

    /// `sum_i M_i f_i^2`.
    pub fn mass_norm_sq(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.mass).map(|(v, m)| m * v * v).sum()
    }
}

/// `Delta = G^T W G`, exactly symmetric: each product `w g_a g_b` is formed
/// once and stored at both `(a, b)` and `(b, a)`.
pub fn assemble_laplacian(op: &CovariantOperator) -> Csr {
    let g = &op.matrix;
    let mut triplets = Vec::with_capacity(4 * g.nrows);
    for r in 0..g.nrows {
        let entries: Vec<(usize, f64)> = g.row(r).collect();
        let w = op.weights[r];
        for (i, &(a, va)) in entries.iter().enumerate() {
            triplets.push((a, a, w * va * va));
            for &(b, vb) in &entries[i + 1..] {
                let v = w * va * vb;
                triplets.push((a, b, v));
                triplets.push((b, a, v));
            }
        }
    }
    Csr::from_triplets(g.ncols, g.ncols, &triplets)
}
