//! Cashflow intensities, their convolution semigroup and the gauge transforms
//! they induce on (deflator, term structure) pairs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::market_model::{Gauge, MarketScenario, TermStructure};
use crate::numerics::gauss_legendre_on;

const ATOM_MERGE_TOL: f64 = 1e-12;

/// Transform denominators below this magnitude are treated as singular.
pub const TRANSFORM_FLOOR: f64 = 1e-12;

/// Polynomial piece of a density: `sum_k c_k ((h - lo) / (hi - lo))^k` on `[lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPiece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<f64>,
}

impl DensityPiece {
    pub fn constant(lo: f64, hi: f64, value: f64) -> Self {
        Self {
            lo,
            hi,
            coeffs: vec![value],
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    fn eval_local(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    /// Value at `h`; zero outside the piece.
    pub fn eval(&self, h: f64) -> f64 {
        if h < self.lo || h >= self.hi {
            return 0.0;
        }
        self.eval_local((h - self.lo) / (self.hi - self.lo))
    }

    // Evaluation without the support check, used for closed-interval quadrature.
    fn eval_unchecked(&self, h: f64) -> f64 {
        self.eval_local((h - self.lo) / (self.hi - self.lo))
    }
}

/// Dirac atoms plus a compactly supported piecewise-polynomial density on `[0, H]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CashflowIntensity {
    atoms: Vec<(f64, f64)>,
    pieces: Vec<DensityPiece>,
}

impl CashflowIntensity {
    pub fn new(atoms: Vec<(f64, f64)>, pieces: Vec<DensityPiece>) -> Result<Self> {
        for &(h, w) in &atoms {
            if !(h.is_finite() && w.is_finite()) || h < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "atom ({h}, {w}) must be finite with nonnegative location"
                )));
            }
        }
        for p in &pieces {
            if !(p.lo.is_finite() && p.hi.is_finite()) || p.lo < 0.0 || p.hi <= p.lo {
                return Err(Error::InvalidInput(format!(
                    "density piece [{}, {}] must lie in [0, inf) with positive width",
                    p.lo, p.hi
                )));
            }
            if p.coeffs.is_empty() || p.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput("density coefficients must be finite".into()));
            }
        }
        Ok(Self::canonical(atoms, pieces))
    }

    /// Unit Dirac mass at `h`, the zero-coupon intensity.
    pub fn dirac(h: f64) -> Result<Self> {
        Self::new(vec![(h, 1.0)], Vec::new())
    }

    /// Piecewise-constant density given by breakpoints `b_0 < … < b_m` and `m` values.
    pub fn piecewise_constant(
        atoms: Vec<(f64, f64)>,
        breakpoints: &[f64],
        values: &[f64],
    ) -> Result<Self> {
        if !breakpoints.is_empty() && breakpoints.len() != values.len() + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len().saturating_sub(1),
                values.len()
            )));
        }
        if breakpoints.is_empty() && !values.is_empty() {
            return Err(Error::DimensionMismatch("density values without breakpoints".into()));
        }
        let pieces = breakpoints
            .windows(2)
            .zip(values)
            .map(|(b, &v)| DensityPiece::constant(b[0], b[1], v))
            .collect();
        Self::new(atoms, pieces)
    }

    /// Indicator of `[lo, hi)`.
    pub fn boxcar(lo: f64, hi: f64) -> Result<Self> {
        Self::piecewise_constant(Vec::new(), &[lo, hi], &[1.0])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[DensityPiece] {
        &self.pieces
    }

    /// Right end of the support.
    pub fn support_end(&self) -> f64 {
        let a = self.atoms.iter().map(|a| a.0).fold(0.0, f64::max);
        let p = self.pieces.iter().map(|p| p.hi).fold(0.0, f64::max);
        a.max(p)
    }

    /// Density value at `h` (atoms excluded).
    pub fn density(&self, h: f64) -> f64 {
        self.pieces.iter().map(|p| p.eval(h)).sum()
    }

    /// Total mass of atoms at `h`.
    pub fn atom_weight(&self, h: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| (a.0 - h).abs() <= ATOM_MERGE_TOL * (1.0 + h.abs()))
            .map(|a| a.1)
            .sum()
    }

    /// `int pi_h g(h) dh`, exact for `g` piecewise linear with kinks inside `kinks`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F, kinks: &[f64]) -> f64 {
        let mut acc: f64 = self.atoms.iter().map(|&(h, w)| w * g(h)).sum();
        for p in &self.pieces {
            let mut cuts = vec![p.lo];
            cuts.extend(kinks.iter().copied().filter(|&k| k > p.lo && k < p.hi));
            cuts.push(p.hi);
            let n = p.degree() / 2 + 2;
            for w in cuts.windows(2) {
                acc += gauss_legendre_on(n, w[0], w[1])
                    .map(|(h, wt)| wt * p.eval_unchecked(h) * g(h))
                    .sum::<f64>();
            }
        }
        acc
    }

    // Merges coincident atoms and re-expresses overlapping pieces on the union
    // of breakpoints, so equal intensities have equal representations.
    fn canonical(atoms: Vec<(f64, f64)>, pieces: Vec<DensityPiece>) -> Self {
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (h, w) in atoms {
            match merged.last_mut() {
                Some(last) if (last.0 - h).abs() <= ATOM_MERGE_TOL * (1.0 + h.abs()) => last.1 += w,
                _ => merged.push((h, w)),
            }
        }
        merged.retain(|a| a.1 != 0.0);

        let mut breaks: Vec<f64> = pieces.iter().flat_map(|p| [p.lo, p.hi]).collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() <= ATOM_MERGE_TOL * (1.0 + b.abs()));
        let mut out = Vec::new();
        for w in breaks.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mid = 0.5 * (lo + hi);
            let active: Vec<&DensityPiece> = pieces
                .iter()
                .filter(|p| p.lo <= mid && mid < p.hi)
                .collect();
            if active.is_empty() {
                continue;
            }
            let degree = active.iter().map(|p| p.degree()).max().unwrap();
            let coeffs = if active.len() == 1 && active[0].lo == lo && active[0].hi == hi {
                active[0].coeffs.clone()
            } else {
                fit_local(lo, hi, degree, |h| {
                    active.iter().map(|p| p.eval_unchecked(h)).sum()
                })
            };
            if coeffs.iter().all(|&c| c == 0.0) {
                continue;
            }
            out.push(DensityPiece { lo, hi, coeffs });
        }
        Self {
            atoms: merged,
            pieces: out,
        }
    }
}

// Interpolates a degree-`degree` polynomial through Chebyshev points of [lo, hi]
// and returns its coefficients in the local coordinate (h - lo) / (hi - lo).
fn fit_local<F: Fn(f64) -> f64>(lo: f64, hi: f64, degree: usize, f: F) -> Vec<f64> {
    let n = degree + 1;
    if n == 1 {
        return vec![f(0.5 * (lo + hi))];
    }
    let s: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::PI * (2 * i + 1) as f64 / (2 * n) as f64).cos())
        .collect();
    let v = DMatrix::from_fn(n, n, |i, j| s[i].powi(j as i32));
    let rhs = DVector::from_iterator(n, s.iter().map(|&si| f(lo + si * (hi - lo))));
    match v.lu().solve(&rhs) {
        Some(c) => c.iter().copied().collect(),
        None => vec![f(0.5 * (lo + hi))],
    }
}

/// Convolution `(pi * nu)_t = int_0^t pi_h nu_{t-h} dh` of two intensities.
pub fn convolve(a: &CashflowIntensity, b: &CashflowIntensity) -> CashflowIntensity {
    let mut atoms = Vec::new();
    for &(ha, wa) in &a.atoms {
        for &(hb, wb) in &b.atoms {
            atoms.push((ha + hb, wa * wb));
        }
    }
    let mut pieces = Vec::new();
    let shift = |(h, w): (f64, f64), p: &DensityPiece| DensityPiece {
        lo: p.lo + h,
        hi: p.hi + h,
        coeffs: p.coeffs.iter().map(|c| c * w).collect(),
    };
    for &atom in &a.atoms {
        pieces.extend(b.pieces.iter().map(|p| shift(atom, p)));
    }
    for &atom in &b.atoms {
        pieces.extend(a.pieces.iter().map(|p| shift(atom, p)));
    }
    for p in &a.pieces {
        for q in &b.pieces {
            pieces.extend(convolve_pieces(p, q));
        }
    }
    CashflowIntensity::canonical(atoms, pieces)
}

// The convolution of two polynomial pieces is polynomial between the four
// breakpoints lo_p+lo_q, lo_p+hi_q, hi_p+lo_q, hi_p+hi_q, of degree
// deg p + deg q + 1; sample it exactly by Gauss-Legendre and interpolate.
fn convolve_pieces(p: &DensityPiece, q: &DensityPiece) -> Vec<DensityPiece> {
    let mut breaks = [p.lo + q.lo, p.lo + q.hi, p.hi + q.lo, p.hi + q.hi];
    breaks.sort_by(f64::total_cmp);
    let degree = p.degree() + q.degree() + 1;
    let gl_points = (p.degree() + q.degree()) / 2 + 1;
    let value = |t: f64| {
        let lo = p.lo.max(t - q.hi);
        let hi = p.hi.min(t - q.lo);
        if hi <= lo {
            return 0.0;
        }
        gauss_legendre_on(gl_points, lo, hi)
            .map(|(u, w)| w * p.eval_unchecked(u) * q.eval_unchecked(t - u))
            .sum()
    };
    breaks
        .windows(2)
        .filter(|w| w[1] - w[0] > ATOM_MERGE_TOL * (1.0 + w[1].abs()))
        .map(|w| DensityPiece {
            lo: w[0],
            hi: w[1],
            coeffs: fit_local(w[0], w[1], degree, value),
        })
        .collect()
}

/// Applies `(D, P) -> (D^pi, P^pi)`.
///
/// `D^pi_t = D_t int pi_h P_{t,t+h} dh` and
/// `P^pi_{t,t+u} = int pi_h P_{t,t+u+h} dh / int pi_h P_{t,t+h} dh`.
/// The transformed surface keeps the offsets `u` with `u + H` inside the
/// stored maturity range, where `H` is the end of the intensity's support.
pub fn apply_gauge_transform(g: &Gauge, pi: &CashflowIntensity) -> Result<Gauge> {
    let ts = &g.term_structure;
    let offsets = ts.offsets();
    let support = pi.support_end();
    let max = ts.max_offset();
    if support > max + 1e-12 * (1.0 + max) {
        return Err(Error::MaturityOutOfRange {
            offset: support,
            max,
        });
    }
    let new_offsets: Vec<f64> = offsets
        .iter()
        .copied()
        .filter(|&u| u + support <= max + 1e-12 * (1.0 + max))
        .collect();
    if new_offsets.len() < 2 {
        return Err(Error::MaturityOutOfRange {
            offset: support + offsets[1],
            max,
        });
    }

    let mut deflator = Vec::with_capacity(g.deflator.len());
    let mut values = Vec::with_capacity(ts.rows() * new_offsets.len());
    for i in 0..ts.rows() {
        let row = ts.row(i);
        let price = |u: f64| crate::numerics::interp_linear(offsets, row, u).unwrap_or(f64::NAN);
        let den = pi.integrate(price, offsets);
        if !(den.abs() >= TRANSFORM_FLOOR) {
            return Err(Error::TransformSingular {
                time_index: i,
                value: den,
            });
        }
        deflator.push(g.deflator[i] * den);
        values.push(1.0);
        for &u in &new_offsets[1..] {
            let kinks: Vec<f64> = offsets.iter().map(|k| k - u).collect();
            let num = pi.integrate(|h| price(u + h), &kinks);
            values.push(num / den);
        }
    }
    Gauge::new(deflator, TermStructure::new(new_offsets, values)?)
}

/// Re-expresses every deflator in units of the portfolio `x_num`.
///
/// Term structures and short rates are numeraire-free and are kept.
pub fn numeraire_transform(scenario: &MarketScenario, x_num: &[f64]) -> Result<MarketScenario> {
    let n = scenario.time_grid().len();
    let mut num = Vec::with_capacity(n);
    for t in 0..n {
        let v: f64 = match crate::market_model::portfolio_deflator(scenario, x_num, t) {
            Ok(v) => v,
            Err(Error::DeflatorSingular { value, .. }) => value,
            Err(e) => return Err(e),
        };
        if !(v > 0.0) {
            return Err(Error::NumeraireNotPositive {
                time_index: t,
                value: v,
            });
        }
        num.push(v);
    }
    let assets = scenario
        .assets()
        .iter()
        .map(|g| {
            let d = g.deflator.iter().zip(&num).map(|(d, n)| d / n).collect();
            Gauge::new(d, g.term_structure.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    MarketScenario::new(
        scenario.time_grid().to_vec(),
        assets,
        scenario.short_rates().to_vec(),
        scenario.domain().clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_model::PortfolioDomain;
    use crate::numerics::linspace;

    #[test]
    fn dirac_times_dirac() {
        let a = CashflowIntensity::new(vec![(0.5, 2.0)], vec![]).unwrap();
        let b = CashflowIntensity::new(vec![(1.25, 3.0)], vec![]).unwrap();
        let c = convolve(&a, &b);
        assert_eq!(c.atoms(), &[(1.75, 6.0)]);
        assert!(c.pieces().is_empty());
    }

    #[test]
    fn dirac_zero_is_identity() {
        let pi = CashflowIntensity::piecewise_constant(
            vec![(0.3, 0.7)],
            &[0.0, 0.5, 1.5],
            &[1.0, -0.4],
        )
        .unwrap();
        let c = convolve(&CashflowIntensity::dirac(0.0).unwrap(), &pi);
        assert_eq!(c, pi);
    }

    #[test]
    fn box_box_triangle_peak() {
        let b = CashflowIntensity::boxcar(0.0, 1.0).unwrap();
        let c = convolve(&b, &b);
        // dense midpoint quadrature at 1e4 points as the oracle
        let oracle = |t: f64| {
            let n = 10_000;
            (0..n)
                .map(|i| {
                    let u = (i as f64 + 0.5) / n as f64;
                    if (0.0..1.0).contains(&(t - u)) { 1.0 / n as f64 } else { 0.0 }
                })
                .sum::<f64>()
        };
        assert!((c.density(1.0) - 1.0).abs() < 1e-6);
        for t in [0.25, 0.5, 1.5, 1.9] {
            assert!((c.density(t) - oracle(t)).abs() < 1e-3);
        }
        assert!((c.density(0.5) - 0.5).abs() < 1e-12);
    }

    fn flat_gauge(rho: f64) -> Gauge {
        let offsets = linspace(0.0, 4.0, 401);
        Gauge::new(
            vec![1.0, 1.3],
            TermStructure::flat(offsets, &[rho, rho]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn dirac_zero_transform_is_identity() {
        let g = flat_gauge(0.04);
        let h = apply_gauge_transform(&g, &CashflowIntensity::dirac(0.0).unwrap()).unwrap();
        assert_eq!(h.deflator, g.deflator);
        for i in 0..2 {
            for (a, b) in h.term_structure.row(i).iter().zip(g.term_structure.row(i)) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dirac_shift_transform() {
        let g = flat_gauge(0.04);
        let h = apply_gauge_transform(&g, &CashflowIntensity::dirac(0.5).unwrap()).unwrap();
        let p = g.term_structure.price(1, 0.5).unwrap();
        assert!((h.deflator[1] - 1.3 * p).abs() < 1e-14);
        let u = 1.2;
        let expect = g.term_structure.price(1, u + 0.5).unwrap() / p;
        assert!((h.term_structure.price(1, u).unwrap() - expect).abs() < 1e-12);
        assert_eq!(h.term_structure.row(0)[0], 1.0);
    }

    #[test]
    fn box_transform_on_flat_gauge() {
        let rho: f64 = 0.04;
        let offsets = linspace(0.0, 4.0, 4001);
        let g = Gauge::new(vec![1.0], TermStructure::flat(offsets, &[rho]).unwrap()).unwrap();
        let h = apply_gauge_transform(&g, &CashflowIntensity::boxcar(0.0, 1.0).unwrap()).unwrap();
        let expect = (1.0 - (-rho).exp()) / rho;
        // linear interpolation of P in u leaves an O(du^2) error
        assert!((h.deflator[0] - expect).abs() < 1e-8);
    }

    #[test]
    fn numeraire_examples() {
        let dom = PortfolioDomain::new(vec![(0.5, 1.5), (0.5, 1.5)]).unwrap();
        let s = MarketScenario::from_paths(
            vec![0.0, 1.0],
            vec![vec![2.0, 2.0], vec![4.0, 4.0]],
            vec![vec![0.0; 2], vec![0.0; 2]],
            dom,
        )
        .unwrap();
        let t = numeraire_transform(&s, &[1.0, 0.0]).unwrap();
        assert_eq!(t.deflator(0, 0), 1.0);
        assert_eq!(t.deflator(1, 1), 2.0);

        let single = MarketScenario::from_paths(
            vec![0.0, 1.0],
            vec![vec![1.7, 2.3]],
            vec![vec![0.0; 2]],
            PortfolioDomain::new(vec![(0.5, 1.5)]).unwrap(),
        )
        .unwrap();
        let t = numeraire_transform(&single, &[1.0]).unwrap();
        assert!(t.assets()[0].deflator.iter().all(|&d| d == 1.0));

        assert!(matches!(
            numeraire_transform(&s, &[-1.0, 0.0]),
            Err(Error::NumeraireNotPositive { .. })
        ));
    }
}
