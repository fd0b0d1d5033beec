//! Smallest eigenpairs of the connection Laplacian.
//!
//! The generalized problem `Delta f = lambda M f` (M the trapezoid node mass)
//! is symmetrized to `A y = lambda y` with `A = M^{-1/2} Delta M^{-1/2}` and
//! solved by block shift-invert subspace iteration with Rayleigh-Ritz, the
//! shifted matrix factored once by sparse Cholesky.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par, Side};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::laplacian::operator::{assemble_covariant, assemble_laplacian, Connection, CovariantOperator, SectionGrid};
use crate::laplacian::sparse::Csr;
use crate::grid::XGrid;

/// Problems up to this size are solved densely.
pub const DENSE_LIMIT: usize = 600;
const START_SEED: u64 = 0x6a7e_5eed;

/// Discretized Laplacian with its symmetrized form.
#[derive(Debug, Clone)]
pub struct LaplacianProblem {
    pub covariant: CovariantOperator,
    /// `Delta = G^T W G`.
    pub laplacian: Csr,
    /// `M^{-1/2} Delta M^{-1/2}`.
    pub symmetric: Csr,
    inv_sqrt_mass: Vec<f64>,
}

impl LaplacianProblem {
    pub fn new<C: Connection + ?Sized>(conn: &C, grid: &XGrid) -> Result<Self> {
        let covariant = assemble_covariant(conn, grid)?;
        let laplacian = assemble_laplacian(&covariant);
        let inv_sqrt_mass: Vec<f64> = covariant.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
        let symmetric = laplacian.scaled(&inv_sqrt_mass, &inv_sqrt_mass);
        Ok(Self {
            covariant,
            laplacian,
            symmetric,
            inv_sqrt_mass,
        })
    }

    pub fn nodes(&self) -> usize {
        self.laplacian.nrows
    }

    /// Energy Rayleigh quotient `sum w (G f)^2 / |f|_M^2`, nonnegative by construction.
    pub fn rayleigh(&self, f: &[f64]) -> f64 {
        self.covariant.energy(f) / self.covariant.mass_norm_sq(f)
    }

    fn section(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.inv_sqrt_mass).map(|(v, s)| v * s).collect()
    }
}

/// Low spectrum of a Laplacian problem.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    /// Energy-form Rayleigh quotients of the eigensections, ascending.
    pub eigenvalues: Vec<f64>,
    /// Ritz values of the symmetrized matrix.
    pub ritz_values: Vec<f64>,
    /// Eigensections with `|f|_M = 1`, signed so that `sum f >= 0`.
    pub sections: Vec<SectionGrid>,
    /// `|A y - theta y|` for each pair.
    pub residuals: Vec<f64>,
    /// Row-sum bound on the norm of the symmetrized matrix.
    pub operator_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl SpectralResult {
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Number of eigenvalues below `eps`.
    pub fn kernel_dim(&self, eps: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| l < eps).count()
    }
}

/// Eigen solver parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub k: usize,
    /// Residual tolerance relative to the operator norm.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            k: 4,
            tol: 1e-10,
            max_iterations: 500,
        }
    }
}

/// `k` smallest eigenpairs. Non-convergence is reported through
/// `converged = false` with the last iterate.
pub fn smallest_eigenpairs(problem: &LaplacianProblem, opts: EigenOptions) -> Result<SpectralResult> {
    let n = problem.nodes();
    if opts.k == 0 || opts.k > n {
        return Err(Error::InvalidInput(format!("k = {} for a problem with {n} nodes", opts.k)));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("eigen tolerance must be positive".into()));
    }
    let a = &problem.symmetric;
    let norm = a.norm_inf();
    let (theta, vecs, iterations, converged) = if n <= DENSE_LIMIT {
        let eig = SymmetricEigen::new(a.to_dense());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let theta: Vec<f64> = order[..opts.k].iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs: Vec<Vec<f64>> = order[..opts.k]
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect();
        (theta, vecs, 1, true)
    } else {
        subspace_iteration(a, norm, opts)?
    };

    let mut residuals = Vec::with_capacity(opts.k);
    let mut sections = Vec::with_capacity(opts.k);
    let mut eigenvalues = Vec::with_capacity(opts.k);
    let mut ok = converged;
    for (th, y) in theta.iter().zip(&vecs) {
        let ay = a.matvec(y);
        let r = ay
            .iter()
            .zip(y)
            .map(|(u, v)| (u - th * v).powi(2))
            .sum::<f64>()
            .sqrt();
        ok &= r <= opts.tol * norm;
        residuals.push(r);
        let mut f = problem.section(y);
        let scale = problem.covariant.mass_norm_sq(&f).sqrt();
        let sign = if f.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        f.iter_mut().for_each(|v| *v *= sign / scale);
        eigenvalues.push(problem.rayleigh(&f));
        sections.push(SectionGrid {
            times: problem.covariant.times.clone(),
            grid: problem.covariant.grid.clone(),
            values: f,
        });
    }
    Ok(SpectralResult {
        eigenvalues,
        ritz_values: theta,
        sections,
        residuals,
        operator_norm: norm,
        converged: ok,
        iterations,
    })
}

type Iterate = (Vec<f64>, Vec<Vec<f64>>, usize, bool);

fn subspace_iteration(a: &Csr, norm: f64, opts: EigenOptions) -> Result<Iterate> {
    // Sequential factorization and solves keep results bitwise reproducible.
    faer::set_global_parallelism(Par::Seq);
    let n = a.nrows;
    let k = opts.k;
    let p = (2 * k).max(k + 6).min(n);
    let shift = 1e-6 * norm;

    let mut lower = Vec::with_capacity(a.nnz() / 2 + n);
    for r in 0..n {
        for (c, v) in a.row(r) {
            if c >= r {
                let v = if c == r { v + shift } else { v };
                lower.push(Triplet::new(c, r, v));
            }
        }
    }
    let b = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &lower)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let llt = b
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut x = DMatrix::<f64>::from_fn(n, p, |_, _| rng.sample(StandardNormal));
    let mut theta = vec![0.0; p];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iterations {
        iterations = it;
        let mut rhs = Mat::<f64>::from_fn(n, p, |i, j| x[(i, j)]);
        llt.solve_in_place(rhs.as_mut());
        let y = DMatrix::<f64>::from_fn(n, p, |i, j| rhs[(i, j)]);
        let q = y.qr().q();
        let mut aq = DMatrix::<f64>::zeros(n, p);
        for j in 0..p {
            let col: Vec<f64> = q.column(j).iter().copied().collect();
            aq.set_column(j, &nalgebra::DVector::from_vec(a.matvec(&col)));
        }
        let h = q.transpose() * &aq;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let v = DMatrix::<f64>::from_fn(p, p, |i, j| eig.eigenvectors[(i, order[j])]);
        theta = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        x = &q * &v;
        let ax = &aq * &v;
        let worst = (0..k)
            .map(|j| (ax.column(j) - x.column(j) * theta[j]).norm())
            .fold(0.0, f64::max);
        if worst <= opts.tol * norm {
            converged = true;
            break;
        }
    }
    let vecs = (0..k).map(|j| x.column(j).iter().copied().collect()).collect();
    Ok((theta[..k].to_vec(), vecs, iterations, converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplacian::operator::ScenarioConnection;
    use crate::market_model::{MarketScenario, PortfolioDomain};
    use crate::numerics::linspace;

    // K = 0: a weighted graph Laplacian with the Neumann kernel of constants.
    struct Flat(Vec<f64>);
    impl Connection for Flat {
        fn times(&self) -> &[f64] {
            &self.0
        }
        fn time_coeff(&self, _: usize, _: &[f64], _: usize) -> Result<f64> {
            Ok(0.0)
        }
        fn space_coeff(&self, _: usize, _: &[f64], _: usize) -> Result<f64> {
            Ok(0.0)
        }
    }

    #[test]
    fn path_graph_kernel_is_constant() {
        let dom = PortfolioDomain::new(vec![(0.0, 1.0)]).unwrap();
        let grid = XGrid::uniform(&dom, 40).unwrap();
        let prob = LaplacianProblem::new(&Flat(linspace(0.0, 1.0, 30)), &grid).unwrap();
        assert!(prob.nodes() > DENSE_LIMIT);
        let res = smallest_eigenpairs(&prob, EigenOptions::default()).unwrap();
        assert!(res.converged);
        assert!(res.lambda_min() < 1e-12, "{}", res.lambda_min());
        let f = &res.sections[0].values;
        let spread = f.iter().cloned().fold(f64::MIN, f64::max) - f.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-6 * f[0].abs(), "{spread}");
        // second eigenvalue of the continuous Neumann problem on the unit square: pi^2
        assert!((res.eigenvalues[1] - std::f64::consts::PI.powi(2)).abs() < 0.05, "{:?}", res.eigenvalues);
    }

    #[test]
    fn sparse_and_dense_agree() {
        let times = linspace(0.0, 1.0, 25);
        let d = vec![
            times.iter().map(|t| (0.01 * t).exp()).collect(),
            times.iter().map(|t| (0.03 * t).exp()).collect(),
        ];
        let s = MarketScenario::from_paths(
            times,
            d,
            vec![vec![0.0; 25], vec![0.0; 25]],
            PortfolioDomain::new(vec![(0.5, 1.5), (0.5, 1.5)]).unwrap(),
        )
        .unwrap();
        let conn = ScenarioConnection::new(&s, Some(7)).unwrap();
        let grid = XGrid::uniform(s.domain(), 9).unwrap();
        let prob = LaplacianProblem::new(&conn, &grid).unwrap();
        let dense = SymmetricEigen::new(prob.symmetric.to_dense());
        let mut ev: Vec<f64> = dense.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let opts = EigenOptions { k: 3, ..Default::default() };
        let res = subspace_iteration(&prob.symmetric, prob.symmetric.norm_inf(), opts).unwrap();
        assert!(res.3);
        for (a, b) in res.0.iter().zip(&ev) {
            assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}
