//! Small grid helpers shared by the curve, curvature and return code.

/// Three-point derivative of `values` on the (possibly nonuniform) grid `nodes`.
///
/// Centered at interior nodes, second-order one-sided at the two ends. Falls
/// back to a plain difference quotient when only two nodes exist.
pub fn grid_derivative(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    assert_eq!(nodes.len(), values.len());
    let n = nodes.len();
    (0..n).map(|i| derivative_at(nodes, values, i)).collect()
}

/// Derivative estimate at a single node, same stencil rules as [`grid_derivative`].
pub fn derivative_at(nodes: &[f64], values: &[f64], i: usize) -> f64 {
    let n = nodes.len();
    match n {
        0 | 1 => 0.0,
        2 => (values[1] - values[0]) / (nodes[1] - nodes[0]),
        _ => {
            let (j, pos) = if i == 0 {
                (1, Stencil::Left)
            } else if i == n - 1 {
                (n - 2, Stencil::Right)
            } else {
                (i, Stencil::Center)
            };
            let (x0, x1, x2) = (nodes[j - 1], nodes[j], nodes[j + 1]);
            let (f0, f1, f2) = (values[j - 1], values[j], values[j + 1]);
            let h1 = x1 - x0;
            let h2 = x2 - x1;
            match pos {
                Stencil::Center => {
                    -h2 / (h1 * (h1 + h2)) * f0
                        + (h2 - h1) / (h1 * h2) * f1
                        + h1 / (h2 * (h1 + h2)) * f2
                }
                Stencil::Left => {
                    -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f0 + (h1 + h2) / (h1 * h2) * f1
                        - h1 / (h2 * (h1 + h2)) * f2
                }
                Stencil::Right => {
                    h2 / (h1 * (h1 + h2)) * f0 - (h1 + h2) / (h1 * h2) * f1
                        + (h1 + 2.0 * h2) / (h2 * (h1 + h2)) * f2
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Stencil {
    Left,
    Center,
    Right,
}

/// Cumulative trapezoid integral, starting at 0 on the first node.
pub fn cumulative_trapezoid(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    for i in 0..nodes.len() {
        if i > 0 {
            acc += 0.5 * (values[i] + values[i - 1]) * (nodes[i] - nodes[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// Piecewise-linear interpolation. Returns `None` outside `[nodes[0], nodes[last]]`.
pub fn interp_linear(nodes: &[f64], values: &[f64], x: f64) -> Option<f64> {
    let n = nodes.len();
    if n == 0 || !x.is_finite() {
        return None;
    }
    let tol = 1e-12 * (1.0 + nodes[n - 1].abs());
    if x < nodes[0] - tol || x > nodes[n - 1] + tol {
        return None;
    }
    if n == 1 {
        return Some(values[0]);
    }
    let k = match nodes.partition_point(|&v| v <= x) {
        0 => 0,
        p if p >= n => n - 2,
        p => p - 1,
    };
    let w = (x - nodes[k]) / (nodes[k + 1] - nodes[k]);
    Some(values[k] + w.clamp(0.0, 1.0) * (values[k + 1] - values[k]))
}

pub fn is_strictly_increasing(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite()) && values.windows(2).all(|w| w[1] > w[0])
}

/// Uniformly spaced nodes on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.into_iter().zip(w).map(move |(xi, wi)| (mid + half * xi, half * wi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_exact_on_quadratics_nonuniform() {
        let nodes = [0.0, 0.1, 0.35, 0.4, 1.0];
        let vals: Vec<f64> = nodes.iter().map(|x| 3.0 * x * x - x + 2.0).collect();
        let d = grid_derivative(&nodes, &vals);
        for (x, dv) in nodes.iter().zip(d) {
            assert!((dv - (6.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_exact_on_linear() {
        let nodes = linspace(0.0, 2.0, 9);
        let vals: Vec<f64> = nodes.iter().map(|x| 0.02 + 0.01 * x).collect();
        let c = cumulative_trapezoid(&nodes, &vals);
        assert!((c[8] - 0.06).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_exact_degree() {
        for n in 1..8 {
            let deg = 2 * n - 1;
            let q: f64 = gauss_legendre_on(n, 0.5, 2.0)
                .map(|(x, w)| w * x.powi(deg as i32))
                .sum();
            let exact = (2f64.powi(deg as i32 + 1) - 0.5f64.powi(deg as i32 + 1)) / (deg + 1) as f64;
            assert!((q - exact).abs() < 1e-12 * exact, "n={n}");
        }
    }

    #[test]
    fn interp_clamps_range() {
        let n = [0.0, 1.0, 2.0];
        let v = [0.0, 10.0, 30.0];
        assert_eq!(interp_linear(&n, &v, 1.5), Some(20.0));
        assert_eq!(interp_linear(&n, &v, 2.0), Some(30.0));
        assert_eq!(interp_linear(&n, &v, 2.5), None);
    }
}
