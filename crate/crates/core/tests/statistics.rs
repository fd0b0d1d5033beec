//! Monte Carlo checks of the simulator and the Nelson estimators against
//! closed forms, all at three standard errors.

use gauge_arb::nelson::{backward_derivative, forward_derivative, NelsonConfig, PathSet};
use gauge_arb::simulation::{
    quadratic_covariation, replay_residual, simulate, Coefficient, Component, ItoModelSpec, PathEnsemble,
};

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

// One asset held flat, one short rate following `dr = (c0 + cs r) dt + b dW`.
fn rate_model(c0: f64, cs: f64, b: f64, r0: f64) -> ItoModelSpec {
    ItoModelSpec {
        assets: 1,
        brownian_dim: 1,
        drift: vec![Coefficient::constant(0.0)],
        volatility: vec![Coefficient::constant(0.0)],
        rate_drift: vec![Coefficient::Affine { c0, ct: 0.0, cs }],
        rate_volatility: vec![Coefficient::constant(b)],
        initial_values: vec![1.0],
        initial_rates: vec![r0],
    }
}

fn rate_paths(e: &PathEnsemble) -> PathSet {
    let values = (0..e.path_count()).map(|p| e.component_path(p, Component::Rate(0))).collect();
    PathSet::new(e.times().to_vec(), values).unwrap()
}

#[test]
fn gbm_terminal_mean() {
    let (alpha, sigma, steps) = (0.08, 0.25, 20);
    let spec = ItoModelSpec::constant(&[alpha], &[vec![sigma]], &[0.0], &[1.0]).unwrap();
    let e = simulate(&spec, 1.0, steps, 40_000, 11).unwrap();
    let st: Vec<f64> = (0..e.path_count()).map(|p| e.values_at(p, steps)[0]).collect();
    let (m, se) = mean_se(&st);
    // Euler-Maruyama mean is exactly (1 + alpha dt)^n
    let em = (1.0 + alpha / steps as f64).powi(steps as i32);
    assert!((m - em).abs() < 3.0 * se, "mean {m} vs {em} (se {se})");
    assert!((m - alpha.exp()).abs() < 3.0 * se + 1e-3);
}

#[test]
fn brownian_bracket_and_increments() {
    let spec = ItoModelSpec::constant(&[0.0, 0.0], &[vec![0.2, 0.0], vec![0.1, 0.3]], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
    let steps = 50;
    let e = simulate(&spec, 2.0, steps, 4000, 3).unwrap();
    let dt = e.dt();
    let qv: Vec<f64> = (0..e.path_count())
        .map(|p| {
            let w = e.brownian_path(p, 0);
            *quadratic_covariation(&w, &w).unwrap().last().unwrap()
        })
        .collect();
    let (m, se) = mean_se(&qv);
    assert!((m - 2.0).abs() < 3.0 * se, "<W,W>_T = {m} (se {se})");

    let cross: Vec<f64> = (0..e.path_count())
        .map(|p| *quadratic_covariation(&e.brownian_path(p, 0), &e.brownian_path(p, 1)).unwrap().last().unwrap())
        .collect();
    let (m, se) = mean_se(&cross);
    assert!(m.abs() < 3.0 * se, "<W1,W2>_T = {m} (se {se})");

    let sq: Vec<f64> = (0..e.path_count())
        .flat_map(|p| (0..steps).map(move |k| (p, k)))
        .map(|(p, k)| e.increment(p, k)[1].powi(2))
        .collect();
    let (m, se) = mean_se(&sq);
    assert!((m - dt).abs() < 3.0 * se, "increment variance {m} vs {dt}");
    assert_eq!(replay_residual(&spec, &e), 0.0);
}

#[test]
fn ou_forward_derivative_is_linear_drift() {
    let theta = 1.5;
    let spec = rate_model(0.0, -theta, 0.4, 1.0);
    let e = simulate(&spec, 1.0, 20, 20_000, 5).unwrap();
    let est = forward_derivative(&rate_paths(&e), NelsonConfig::default());
    let mut within = 0;
    let mut total = 0;
    for slice in &est.slices[..20] {
        for b in slice.iter().filter(|b| b.usable) {
            total += 1;
            if (b.value + theta * b.center).abs() < 3.0 * b.stderr {
                within += 1;
            }
        }
    }
    assert!(total > 300);
    assert!(within as f64 >= 0.97 * total as f64, "{within} of {total} bins");
}

#[test]
fn brownian_backward_derivative() {
    // D* W_t = W_t / t
    let spec = rate_model(0.0, 0.0, 1.0, 0.0);
    let e = simulate(&spec, 1.0, 10, 20_000, 9).unwrap();
    let est = backward_derivative(&rate_paths(&e), NelsonConfig::default());
    let mut within = 0;
    let mut total = 0;
    for (k, slice) in est.slices.iter().enumerate().skip(1) {
        let t = e.times()[k];
        for b in slice.iter().filter(|b| b.usable) {
            total += 1;
            if (b.value - b.center / t).abs() < 3.0 * b.stderr {
                within += 1;
            }
        }
    }
    // about 99.7% of bins within 3 s.e.; allow a few misses
    assert!(within as f64 >= 0.97 * total as f64, "{within} of {total} bins");
}

#[test]
fn deterministic_paths_give_classical_derivative() {
    let times: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
    let values: Vec<Vec<f64>> = (0..200).map(|p| times.iter().map(|t| (0.01 * p as f64) + t * t).collect()).collect();
    let set = PathSet::new(times.clone(), values).unwrap();
    let f = forward_derivative(&set, NelsonConfig { bins: 4, min_bin_count: 10 });
    let dt = 1.0 / 40.0;
    for (k, slice) in f.slices.iter().enumerate().take(40) {
        for b in slice {
            let exact = 2.0 * times[k];
            assert!((b.value - exact).abs() <= 1.01 * dt, "t={}: {} vs {exact}", times[k], b.value);
        }
    }
}

#[test]
fn weak_order_of_euler_maruyama() {
    let (alpha, sigma) = (1.0, 0.2);
    let spec = ItoModelSpec::constant(&[alpha], &[vec![sigma]], &[0.0], &[1.0]).unwrap();
    let mut errs = Vec::new();
    for steps in [2usize, 4, 8] {
        let e = simulate(&spec, 1.0, steps, 200_000, 21).unwrap();
        let st: Vec<f64> = (0..e.path_count()).map(|p| e.values_at(p, steps)[0]).collect();
        let (m, se) = mean_se(&st);
        errs.push(((m - alpha.exp()).abs(), se));
    }
    for w in errs.windows(2) {
        let order = (w[0].0 / w[1].0).log2();
        assert!((0.6..1.4).contains(&order), "weak order {order} from {errs:?}");
    }
}

#[test]
fn same_seed_same_ensemble() {
    let spec = ItoModelSpec::constant(&[0.05], &[vec![0.3]], &[0.01], &[1.0]).unwrap();
    let a = simulate(&spec, 1.0, 16, 500, 42).unwrap();
    let b = simulate(&spec, 1.0, 16, 500, 42).unwrap();
    let c = simulate(&spec, 1.0, 16, 500, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    // path p does not depend on how many paths are drawn
    let d = simulate(&spec, 1.0, 16, 50, 42).unwrap();
    for p in 0..50 {
        assert_eq!(a.component_path(p, Component::Asset(0)), d.component_path(p, Component::Asset(0)));
    }
}
