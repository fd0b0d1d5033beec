//! Uniform tensor grids over the portfolio domain.

use crate::error::{Error, Result};
use crate::market_model::PortfolioDomain;
use crate::numerics::linspace;

/// Largest portfolio dimension the tensor grids accept.
pub const MAX_GRID_DIM: usize = 3;

/// Uniform nodes per axis; nodes are flattened with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct XGrid {
    axes: Vec<Vec<f64>>,
}

impl XGrid {
    pub fn uniform(domain: &PortfolioDomain, nodes_per_axis: usize) -> Result<Self> {
        if domain.dim() > MAX_GRID_DIM {
            return Err(Error::InvalidInput(format!(
                "tensor grids support at most {MAX_GRID_DIM} assets, got {}",
                domain.dim()
            )));
        }
        if nodes_per_axis < 3 {
            return Err(Error::InvalidInput("grids need at least 3 nodes per axis".into()));
        }
        Ok(Self {
            axes: domain
                .bounds()
                .iter()
                .map(|&(lo, hi)| linspace(lo, hi, nodes_per_axis))
                .collect(),
        })
    }

    pub fn from_axes(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|a| a.len() < 2 || !crate::numerics::is_strictly_increasing(a)) {
            return Err(Error::InvalidInput("grid axes must be increasing with at least 2 nodes".into()));
        }
        Ok(Self { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of a flat node index.
    pub fn multi_index(&self, mut node: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for a in (0..self.axes.len()).rev() {
            let n = self.axes[a].len();
            idx[a] = node % n;
            node /= n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, axis)| acc * axis.len() + i)
    }

    pub fn point(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .zip(&self.axes)
            .map(|(&i, axis)| axis[i])
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|n| self.point(n)).collect()
    }

    /// Spacing of axis `a` (uniform grids).
    pub fn spacing(&self, a: usize) -> f64 {
        self.axes[a][1] - self.axes[a][0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_and_multi_index_roundtrip() {
        let d = PortfolioDomain::new(vec![(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).unwrap();
        let g = XGrid::uniform(&d, 4).unwrap();
        assert_eq!(g.len(), 64);
        for n in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(n)), n);
        }
        assert_eq!(g.point(1), vec![0.0, 1.0, 2.0 + 1.0 / 3.0]);
    }

    #[test]
    fn dimension_cap() {
        let d = PortfolioDomain::new(vec![(0.0, 1.0); 4]).unwrap();
        assert!(XGrid::uniform(&d, 5).is_err());
    }
}
