//! Property tests of the algebraic laws and operator invariants.

use gauge_arb::arbitrage::zc_range_test;
use gauge_arb::gauge_algebra::{apply_gauge_transform, convolve, CashflowIntensity};
use gauge_arb::grid::XGrid;
use gauge_arb::laplacian::{LaplacianProblem, ScenarioConnection};
use gauge_arb::market_model::{portfolio_deflator, Gauge, MarketScenario, PortfolioDomain, TermStructure};
use gauge_arb::nelson::{mean_derivative, NelsonConfig, PathSet};
use gauge_arb::numerics::linspace;
use gauge_arb::utility::{maximize_expected_utility, UtilityFunction};
use gauge_arb::arbitrage::DeterministicReturn;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn intensity() -> impl Strategy<Value = CashflowIntensity> {
    let atoms = prop::collection::vec((0.0..0.5f64, 0.1..2.0f64), 0..3);
    let density = prop::option::of((0.0..0.3f64, prop::collection::vec((0.02..0.15f64, 0.1..2.0f64), 1..3)));
    (atoms, density)
        .prop_filter("empty intensity", |(a, d)| !a.is_empty() || d.is_some())
        .prop_map(|(atoms, density)| {
            let (breaks, values) = match density {
                Some((start, segs)) => {
                    let mut b = vec![start];
                    let mut v = Vec::new();
                    for (w, val) in segs {
                        b.push(b.last().unwrap() + w);
                        v.push(val);
                    }
                    (b, v)
                }
                None => (Vec::new(), Vec::new()),
            };
            CashflowIntensity::piecewise_constant(atoms, &breaks, &values).unwrap()
        })
}

// Atoms matched one to one and densities compared on a fine probe set.
fn assert_same(a: &CashflowIntensity, b: &CashflowIntensity, tol: f64) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.atoms().len(), b.atoms().len());
    for (x, y) in a.atoms().iter().zip(b.atoms()) {
        prop_assert!((x.0 - y.0).abs() < 1e-12 && (x.1 - y.1).abs() < tol * (1.0 + x.1.abs()));
    }
    let end = a.support_end().max(b.support_end());
    for i in 0..400 {
        let t = end * (i as f64 + 0.377) / 400.0;
        let (da, db) = (a.density(t), b.density(t));
        prop_assert!((da - db).abs() < tol * (1.0 + da.abs()), "density at {}: {} vs {}", t, da, db);
    }
    let mass = |c: &CashflowIntensity| c.integrate(|h| (-h).exp(), &[]);
    prop_assert!((mass(a) - mass(b)).abs() < tol * (1.0 + mass(a).abs()));
    Ok(())
}

fn curve_gauge(r: f64, slope: f64) -> Gauge {
    let offsets = linspace(0.0, 3.0, 301);
    let rows = 3;
    let mut values = Vec::new();
    for i in 0..rows {
        let level = r + 0.002 * i as f64;
        values.extend(offsets.iter().map(|&u| (-(level + slope * u) * u).exp()));
    }
    let d = (0..rows).map(|i| 1.0 + 0.1 * i as f64).collect();
    Gauge::new(d, TermStructure::new(offsets, values).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn convolution_commutes(a in intensity(), b in intensity()) {
        assert_same(&convolve(&a, &b), &convolve(&b, &a), 1e-6)?;
    }

    #[test]
    fn convolution_associates(a in intensity(), b in intensity(), c in intensity()) {
        assert_same(&convolve(&convolve(&a, &b), &c), &convolve(&a, &convolve(&b, &c)), 1e-6)?;
    }

    #[test]
    fn dirac_semigroup(h in 0.0..1.0f64, k in 0.0..1.0f64, a in intensity()) {
        let d = |x: f64| CashflowIntensity::dirac(x).unwrap();
        let c = convolve(&d(h), &d(k));
        prop_assert_eq!(c.atoms().len(), 1);
        prop_assert!((c.atoms()[0].0 - (h + k)).abs() < 1e-15);
        assert_same(&convolve(&d(0.0), &a), &a, 1e-12)?;
    }

    #[test]
    fn transform_composition(a in intensity(), b in intensity(), r in 0.0..0.06f64, slope in -0.005..0.005f64) {
        let g = curve_gauge(r, slope);
        let twice = apply_gauge_transform(&apply_gauge_transform(&g, &b).unwrap(), &a).unwrap();
        let once = apply_gauge_transform(&g, &convolve(&a, &b)).unwrap();
        for (x, y) in twice.deflator.iter().zip(&once.deflator) {
            prop_assert!((x - y).abs() < 1e-6 * y.abs(), "deflator {} vs {}", x, y);
        }
        let (ta, tb) = (&twice.term_structure, &once.term_structure);
        for i in 0..ta.rows() {
            for &u in tb.offsets().iter().filter(|&&u| u <= ta.max_offset()) {
                let (pa, pb) = (ta.price(i, u).unwrap(), tb.price(i, u).unwrap());
                prop_assert!((pa - pb).abs() < 1e-6, "P at u = {}: {} vs {}", u, pa, pb);
            }
        }
    }

    #[test]
    fn deflator_is_linear_in_nominals(
        g in prop::collection::vec(-0.1..0.1f64, 2),
        x in prop::collection::vec(0.5..1.5f64, 2),
        y in prop::collection::vec(0.5..1.5f64, 2),
        a in 0.1..2.0f64,
        b in 0.1..2.0f64,
    ) {
        let s = exp_scenario(&g, &[0.0, 0.0], 5);
        let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        for t in 0..5 {
            let lhs = portfolio_deflator(&s, &z, t).unwrap();
            let rhs = a * portfolio_deflator(&s, &x, t).unwrap() + b * portfolio_deflator(&s, &y, t).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12 * rhs.abs());
        }
    }

    #[test]
    fn zc_residual_invariant_under_right_multiplication(
        n in 1usize..4,
        k in 1usize..4,
        seed in prop::collection::vec(-1.0..1.0f64, 40),
    ) {
        let alpha: Vec<f64> = (0..n).map(|i| 0.05 * seed[i]).collect();
        let r: Vec<f64> = (0..n).map(|i| 0.02 * seed[4 + i]).collect();
        let sigma = DMatrix::from_fn(n, k, |i, j| 0.3 * seed[8 + i * 4 + j]);
        let m = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { 0.0 } + 0.3 * seed[24 + i * 4 + j]);
        prop_assume!(m.determinant().abs() > 0.1);
        let rowmajor = |s: &DMatrix<f64>| (0..n).flat_map(|i| (0..k).map(move |j| s[(i, j)])).collect::<Vec<_>>();
        let c = vec![0.0; n];
        let a = zc_range_test(&alpha, &rowmajor(&sigma), &r, &c).unwrap();
        let b = zc_range_test(&alpha, &rowmajor(&(&sigma * &m)), &r, &c).unwrap();
        prop_assert!((a.residual - b.residual).abs() < 1e-10, "{} vs {}", a.residual, b.residual);
        prop_assert_eq!(a.verdict, b.verdict);
    }

    #[test]
    fn nelson_estimates_ignore_path_order(perm_seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let times = linspace(0.0, 1.0, 6);
        let paths: Vec<Vec<f64>> = (0..300)
            .map(|p| times.iter().map(|t| ((p * 37 % 101) as f64 / 50.0 - 1.0) * t + (p % 7) as f64 * t * t).collect())
            .collect();
        let mut shuffled = paths.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        let cfg = NelsonConfig { bins: 8, min_bin_count: 10 };
        let a = mean_derivative(&PathSet::new(times.clone(), paths).unwrap(), cfg);
        let b = mean_derivative(&PathSet::new(times, shuffled).unwrap(), cfg);
        prop_assert_eq!(a.slices, b.slices);
    }
}

fn exp_scenario(g: &[f64], r: &[f64], nt: usize) -> MarketScenario {
    let times = linspace(0.0, 1.0, nt);
    let d = g.iter().map(|gj| times.iter().map(|t| (gj * t).exp()).collect()).collect();
    let rates = r.iter().map(|rj| vec![*rj; nt]).collect();
    MarketScenario::from_paths(times, d, rates, PortfolioDomain::new(vec![(0.5, 1.5); g.len()]).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn laplacian_is_symmetric_and_nonnegative(
        g in prop::collection::vec(-0.3..0.3f64, 1..3),
        r in prop::collection::vec(-0.1..0.1f64, 2),
    ) {
        let s = exp_scenario(&g, &r[..g.len()], 5);
        let conn = ScenarioConnection::new(&s, None).unwrap();
        let grid = XGrid::uniform(s.domain(), 5).unwrap();
        let p = LaplacianProblem::new(&conn, &grid).unwrap();
        prop_assert_eq!(p.laplacian.asymmetry(), 0.0);
        prop_assert_eq!(p.symmetric.asymmetry(), 0.0);
        let dense = p.symmetric.to_dense();
        let eig = dense.clone().symmetric_eigen();
        let norm = p.symmetric.norm_inf();
        prop_assert!(eig.eigenvalues.min() >= -1e-12 * norm, "min eigenvalue {}", eig.eigenvalues.min());
    }

    #[test]
    fn utility_argmax_survives_affine_maps(
        g in prop::collection::vec(-0.1..0.1f64, 2),
        scale in 0.1..10.0f64,
        shift in -5.0..5.0f64,
    ) {
        let s = exp_scenario(&g, &[0.0, 0.01], 9);
        let f = DeterministicReturn::new(&s);
        let grid = XGrid::uniform(s.domain(), 5).unwrap();
        for u in [UtilityFunction::log(), UtilityFunction::power(2.5).unwrap(), UtilityFunction::exponential(1.5).unwrap()] {
            let a = maximize_expected_utility(&f, &u, 0.0, 1.0, &grid, Default::default()).unwrap();
            let b = maximize_expected_utility(&f, &u.affine(scale, shift).unwrap(), 0.0, 1.0, &grid, Default::default()).unwrap();
            prop_assert_eq!(a.strategy, b.strategy);
            prop_assert_eq!(a.verdict, b.verdict);
        }
    }
}
