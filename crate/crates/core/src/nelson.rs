//! Nelson forward, backward and mean stochastic derivatives estimated from
//! path ensembles.
//!
//! Conditional expectations given the present are replaced by averages over
//! equal-count bins of the current state (Markov reduction). The step `h` of
//! the difference quotients is one grid step.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::simulation::{Component, PathEnsemble};

/// Binning parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelsonConfig {
    pub bins: usize,
    pub min_bin_count: usize,
}

impl Default for NelsonConfig {
    fn default() -> Self {
        Self {
            bins: 32,
            min_bin_count: 50,
        }
    }
}

impl NelsonConfig {
    /// Default config with the bin count reduced so every bin can be usable.
    pub fn for_paths(paths: usize) -> Self {
        let d = Self::default();
        Self {
            bins: (paths / d.min_bin_count).clamp(1, d.bins),
            ..d
        }
    }
}

/// Scalar paths on a shared time grid, `values[path][step]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl PathSet {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InsufficientSamples("a path set needs at least two time nodes".into()));
        }
        if values.is_empty() {
            return Err(Error::InsufficientSamples("a path set needs at least one path".into()));
        }
        if values.iter().any(|p| p.len() != times.len()) {
            return Err(Error::GridMismatch("every path must match the time grid".into()));
        }
        Ok(Self { times, values })
    }

    pub fn from_ensemble(ensemble: &PathEnsemble, c: Component) -> Self {
        let values = (0..ensemble.path_count())
            .map(|p| ensemble.component_path(p, c))
            .collect();
        Self {
            times: ensemble.times().to_vec(),
            values,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn paths(&self) -> &[Vec<f64>] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeKind {
    Forward,
    Backward,
    Mean,
}

/// One state bin at one time node.
#[derive(Debug, Clone, PartialEq)]
pub struct BinEstimate {
    pub time_index: usize,
    pub time: f64,
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
    pub stderr: f64,
    pub count: usize,
    pub usable: bool,
}

/// Binned derivative estimates for every time node of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeEstimate {
    pub kind: DerivativeKind,
    pub times: Vec<f64>,
    pub slices: Vec<Vec<BinEstimate>>,
}

impl DerivativeEstimate {
    /// Estimate at `state` and time node `k`, linear between usable bin centers
    /// and flat beyond the outermost ones. `None` if the slice has no usable bin.
    pub fn at(&self, k: usize, state: f64) -> Option<(f64, f64)> {
        let bins: Vec<&BinEstimate> = self.slices[k].iter().filter(|b| b.usable).collect();
        let first = bins.first()?;
        let last = bins.last().unwrap();
        if state <= first.center {
            return Some((first.value, first.stderr));
        }
        if state >= last.center {
            return Some((last.value, last.stderr));
        }
        let i = bins.partition_point(|b| b.center <= state);
        let (a, b) = (bins[i - 1], bins[i]);
        let w = if b.center > a.center {
            (state - a.center) / (b.center - a.center)
        } else {
            0.0
        };
        Some((
            a.value + w * (b.value - a.value),
            a.stderr + w * (b.stderr - a.stderr),
        ))
    }

    /// Count of bins flagged as having too few samples.
    pub fn unusable_bins(&self) -> usize {
        self.slices.iter().flatten().filter(|b| !b.usable).count()
    }

    /// CSV with columns `time,bin_center,value,stderr,n`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,bin_center,value,stderr,n")?;
        for b in self.slices.iter().flatten() {
            writeln!(out, "{},{},{},{},{}", b.time, b.center, b.value, b.stderr, b.count)?;
        }
        Ok(())
    }
}

// Sort key giving a canonical bin assignment independent of path order;
// ties in the present state are broken by the neighbouring values.
fn slice_order(set: &PathSet, k: usize) -> Vec<usize> {
    let last = set.times.len() - 1;
    let key = |p: &Vec<f64>| {
        (
            p[k],
            if k < last { p[k + 1] } else { 0.0 },
            if k > 0 { p[k - 1] } else { 0.0 },
        )
    };
    let mut idx: Vec<usize> = (0..set.values.len()).collect();
    idx.sort_by(|&a, &b| {
        let (ka, kb) = (key(&set.values[a]), key(&set.values[b]));
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
    });
    idx
}

// Equal-count ranges over sorted states, widened so that tied states share a
// bin: splitting a tie would sort it by the future value and leak it into the
// conditional mean.
fn bin_ranges(states: &[f64], bins: usize) -> Vec<std::ops::Range<usize>> {
    let n = states.len();
    let bins = bins.clamp(1, n.max(1));
    let mut out = Vec::with_capacity(bins);
    let mut start = 0;
    for b in 1..=bins {
        let mut end = (b * n / bins).max(start);
        while end > 0 && end < n && states[end] == states[end - 1] {
            end += 1;
        }
        if end > start {
            out.push(start..end);
            start = end;
        }
    }
    out
}

// Forward quotient at k < last, backward quotient at k > 0; the missing side
// at a grid end falls back to the available one.
fn quotient(p: &[f64], times: &[f64], k: usize, kind: DerivativeKind) -> f64 {
    let last = times.len() - 1;
    let fwd = |k: usize| (p[k + 1] - p[k]) / (times[k + 1] - times[k]);
    let bwd = |k: usize| (p[k] - p[k - 1]) / (times[k] - times[k - 1]);
    match kind {
        DerivativeKind::Forward if k < last => fwd(k),
        DerivativeKind::Backward if k > 0 => bwd(k),
        DerivativeKind::Forward => bwd(k),
        DerivativeKind::Backward => fwd(k),
        DerivativeKind::Mean => unreachable!(),
    }
}

fn one_sided(set: &PathSet, kind: DerivativeKind, cfg: NelsonConfig) -> DerivativeEstimate {
    let slices = (0..set.times.len())
        .into_par_iter()
        .map(|k| {
            let order = slice_order(set, k);
            let sorted: Vec<f64> = order.iter().map(|&p| set.values[p][k]).collect();
            bin_ranges(&sorted, cfg.bins)
                .into_iter()
                .map(|r| {
                    let members = &order[r];
                    let n = members.len() as f64;
                    let states: Vec<f64> = members.iter().map(|&p| set.values[p][k]).collect();
                    let q: Vec<f64> = members
                        .iter()
                        .map(|&p| quotient(&set.values[p], &set.times, k, kind))
                        .collect();
                    let mean = q.iter().sum::<f64>() / n;
                    let var = if members.len() > 1 {
                        q.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
                    } else {
                        0.0
                    };
                    BinEstimate {
                        time_index: k,
                        time: set.times[k],
                        center: states.iter().sum::<f64>() / n,
                        lo: states[0],
                        hi: *states.last().unwrap(),
                        value: mean,
                        stderr: (var / n).sqrt(),
                        count: members.len(),
                        usable: members.len() >= cfg.min_bin_count,
                    }
                })
                .collect()
        })
        .collect();
    DerivativeEstimate {
        kind,
        times: set.times.clone(),
        slices,
    }
}

/// `DQ_t = E[(Q_{t+h} - Q_t)/h | Q_t]`.
pub fn forward_derivative(set: &PathSet, cfg: NelsonConfig) -> DerivativeEstimate {
    one_sided(set, DerivativeKind::Forward, cfg)
}

/// `D*Q_t = E[(Q_t - Q_{t-h})/h | Q_t]`.
pub fn backward_derivative(set: &PathSet, cfg: NelsonConfig) -> DerivativeEstimate {
    one_sided(set, DerivativeKind::Backward, cfg)
}

/// `(DQ + D*Q)/2`, bin by bin; standard errors combined in quadrature.
pub fn mean_derivative(set: &PathSet, cfg: NelsonConfig) -> DerivativeEstimate {
    let f = forward_derivative(set, cfg);
    let b = backward_derivative(set, cfg);
    combine_mean(&f, &b)
}

/// Averages two one-sided estimates computed with the same binning.
pub fn combine_mean(f: &DerivativeEstimate, b: &DerivativeEstimate) -> DerivativeEstimate {
    let slices = f
        .slices
        .iter()
        .zip(&b.slices)
        .map(|(fs, bs)| {
            fs.iter()
                .zip(bs)
                .map(|(x, y)| BinEstimate {
                    value: 0.5 * (x.value + y.value),
                    stderr: 0.5 * (x.stderr * x.stderr + y.stderr * y.stderr).sqrt(),
                    ..x.clone()
                })
                .collect()
        })
        .collect();
    DerivativeEstimate {
        kind: DerivativeKind::Mean,
        times: f.times.clone(),
        slices,
    }
}

/// Convenience wrapper reading one component of an ensemble.
pub fn ensemble_derivative(
    ensemble: &PathEnsemble,
    c: Component,
    kind: DerivativeKind,
    cfg: NelsonConfig,
) -> DerivativeEstimate {
    let set = PathSet::from_ensemble(ensemble, c);
    match kind {
        DerivativeKind::Forward => forward_derivative(&set, cfg),
        DerivativeKind::Backward => backward_derivative(&set, cfg),
        DerivativeKind::Mean => mean_derivative(&set, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linspace;

    fn squares(paths: usize) -> PathSet {
        let t = linspace(0.0, 1.0, 101);
        let p: Vec<f64> = t.iter().map(|s| s * s).collect();
        PathSet::new(t, vec![p; paths]).unwrap()
    }

    #[test]
    fn deterministic_square_gives_two_t() {
        let set = squares(60);
        let cfg = NelsonConfig::default();
        let f = forward_derivative(&set, cfg);
        let b = backward_derivative(&set, cfg);
        let m = mean_derivative(&set, cfg);
        for k in 1..100 {
            let t = set.times()[k];
            assert!((f.slices[k][0].value - 2.0 * t).abs() <= 0.0101);
            assert!((b.slices[k][0].value - 2.0 * t).abs() <= 0.0101);
            assert!((m.slices[k][0].value - 2.0 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_is_average_bin_by_bin() {
        let set = squares(100);
        let cfg = NelsonConfig::default();
        let f = forward_derivative(&set, cfg);
        let b = backward_derivative(&set, cfg);
        let m = mean_derivative(&set, cfg);
        for ((fs, bs), ms) in f.slices.iter().zip(&b.slices).zip(&m.slices) {
            for ((x, y), z) in fs.iter().zip(bs).zip(ms) {
                assert_eq!(z.value, 0.5 * (x.value + y.value));
            }
        }
    }

    #[test]
    fn small_bins_are_flagged() {
        let set = squares(10);
        let f = forward_derivative(&set, NelsonConfig::default());
        assert!(f.slices.iter().flatten().all(|b| !b.usable));
        assert!(f.at(3, 0.0).is_none());
        let g = forward_derivative(&set, NelsonConfig { bins: 1, min_bin_count: 5 });
        assert!(g.at(3, 0.0).is_some());
    }

    #[test]
    fn bins_partition_evenly() {
        let states: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(bin_ranges(&states, 3), vec![0..3, 3..6, 6..10]);
        assert_eq!(bin_ranges(&states[..2], 32).len(), 2);
    }

    #[test]
    fn ties_stay_in_one_bin() {
        let states = [0.0, 1.0, 1.0, 1.0, 1.0, 2.0];
        assert_eq!(bin_ranges(&states, 3), vec![0..5, 5..6]);
        assert_eq!(bin_ranges(&[3.0; 8], 4), vec![0..8]);
    }
}
