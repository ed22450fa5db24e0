//! Sparse and dense linear algebra: symmetric-indefinite direct solves,
//! dense SVD rank/nullity, orthonormal null-space bases and smallest
//! generalized eigenvalues.

mod ldlt;
mod sparse;

pub use ldlt::SymmetricFactor;
pub use sparse::SparseMatrix;

use nalgebra::DMatrix;
use thiserror::Error;

/// Dense fallback threshold for symmetric solves.
pub const DENSE_SOLVE_LIMIT: usize = 3000;
/// Size cap for dense SVD rank computations.
pub const SVD_SIZE_LIMIT: usize = 5000;
/// Default relative SVD tolerance separating exact zeros from
/// discretization-scale singular values.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("singular system near unknown {pivot} (residual {residual:.3e})")]
    Singular { pivot: usize, residual: f64 },
    #[error("problem size {n} exceeds the cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("matrix is not positive definite")]
    NotSpd,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Relative residual demanded after iterative refinement.
    pub tol: f64,
    /// Inertia hints per unknown: +1 primal-like, -1 multiplier-like.
    pub signs: Option<Vec<i8>>,
    /// Skip the dense fallback (used by tests).
    pub force_sparse: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            signs: None,
            force_sparse: false,
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Reusable factorization of a symmetric matrix (dense LU below
/// [`DENSE_SOLVE_LIMIT`], sparse LDL^T above), solving with iterative
/// refinement against the original matrix.
pub struct Factorization<'a> {
    a: &'a SparseMatrix,
    tol: f64,
    inner: FactorInner,
}

enum FactorInner {
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Sparse(SymmetricFactor),
}

impl<'a> Factorization<'a> {
    pub fn new(a: &'a SparseMatrix, opts: &SolveOptions) -> Result<Self, LinalgError> {
        let n = a.nrows;
        if n != a.ncols {
            return Err(LinalgError::NotSymmetric(f64::INFINITY));
        }
        let asym = a.asymmetry();
        if asym > 1e-12 * a.max_abs().max(1.0) {
            return Err(LinalgError::NotSymmetric(asym));
        }
        let inner = if n < DENSE_SOLVE_LIMIT && !opts.force_sparse {
            FactorInner::Dense(a.to_dense().lu())
        } else {
            FactorInner::Sparse(SymmetricFactor::new(a, opts.signs.as_deref())?)
        };
        Ok(Self {
            a,
            tol: opts.tol,
            inner,
        })
    }

    fn solve_once(&self, b: &[f64]) -> Option<Vec<f64>> {
        match &self.inner {
            FactorInner::Dense(lu) => {
                let rhs = nalgebra::DVector::from_column_slice(b);
                lu.solve(&rhs).map(|x| x.as_slice().to_vec())
            }
            FactorInner::Sparse(f) => Some(f.solve(b)),
        }
    }

    /// Solves to the configured tolerance; refinement removes the effect of
    /// dynamic regularization.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; self.a.ncols]);
        }
        let mut x = self.solve_once(b).ok_or(LinalgError::Singular {
            pivot: 0,
            residual: f64::INFINITY,
        })?;
        let mut rel = f64::INFINITY;
        for _ in 0..4 {
            let ax = self.a.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bb, aa)| bb - aa).collect();
            rel = norm2(&r) / bnorm;
            if rel <= self.tol {
                return Ok(x);
            }
            let dx = self.solve_once(&r).ok_or(LinalgError::Singular {
                pivot: 0,
                residual: rel,
            })?;
            for i in 0..x.len() {
                x[i] += dx[i];
            }
        }
        let ax = self.a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bb, aa)| bb - aa).collect();
        rel = rel.min(norm2(&r) / bnorm);
        if rel <= self.tol {
            return Ok(x);
        }
        let pivot = match &self.inner {
            FactorInner::Sparse(f) => f.first_regularized().unwrap_or(f.min_pivot().0),
            FactorInner::Dense(lu) => {
                let u = lu.u();
                let mut arg = 0;
                let mut min = f64::INFINITY;
                for i in 0..u.nrows().min(u.ncols()) {
                    if u[(i, i)].abs() < min {
                        min = u[(i, i)].abs();
                        arg = i;
                    }
                }
                arg
            }
        };
        Err(LinalgError::Singular {
            pivot,
            residual: rel,
        })
    }
}

/// Factor-and-solve in one call.
pub fn factor_solve(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<f64>, LinalgError> {
    Factorization::new(a, opts)?.solve(b)
}

/// Rank and nullity (of the column space) by dense SVD with relative
/// tolerance `tol` on the largest singular value.
pub fn rank_nullity_dense(a: &DMatrix<f64>, tol: f64) -> Result<(usize, usize), LinalgError> {
    let n = a.nrows().min(a.ncols());
    if n > SVD_SIZE_LIMIT {
        return Err(LinalgError::TooLarge {
            n,
            cap: SVD_SIZE_LIMIT,
        });
    }
    if n == 0 {
        return Ok((0, a.ncols()));
    }
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let rank = if smax == 0.0 {
        0
    } else {
        svd.singular_values.iter().filter(|&&s| s > tol * smax).count()
    };
    Ok((rank, a.ncols() - rank))
}

pub fn rank_nullity(a: &SparseMatrix, tol: f64) -> Result<(usize, usize), LinalgError> {
    rank_nullity_dense(&a.to_dense(), tol)
}

/// Orthonormal basis of `ker(G^T)` (the orthogonal complement of the column
/// space of `G`), by Householder QR. `G` must have full column rank up to
/// `tol` relative to its largest column.
pub fn nullspace_of_transpose(g: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>, LinalgError> {
    let (m, n) = (g.nrows(), g.ncols());
    assert!(n <= m, "expected a tall matrix");
    let mut a = g.clone();
    let mut reflectors: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(n);
    let scale = g.amax().max(1e-300);
    for j in 0..n {
        let mut v = nalgebra::DVector::zeros(m - j);
        for i in j..m {
            v[i - j] = a[(i, j)];
        }
        let alpha = -v[0].signum() * v.norm();
        if alpha.abs() <= tol * scale {
            return Err(LinalgError::Singular {
                pivot: j,
                residual: alpha.abs(),
            });
        }
        v[0] -= alpha;
        let vnorm = v.norm();
        if vnorm > 0.0 {
            v /= vnorm;
        }
        for c in j..n {
            let mut dot = 0.0;
            for i in j..m {
                dot += v[i - j] * a[(i, c)];
            }
            for i in j..m {
                a[(i, c)] -= 2.0 * dot * v[i - j];
            }
        }
        reflectors.push(v);
    }
    // Null space columns: Q e_i for i >= n, applying reflectors last-first.
    let mut z = DMatrix::zeros(m, m - n);
    for (c, i) in (n..m).enumerate() {
        z[(i, c)] = 1.0;
    }
    for j in (0..n).rev() {
        let v = &reflectors[j];
        for c in 0..m - n {
            let mut dot = 0.0;
            for i in j..m {
                dot += v[i - j] * z[(i, c)];
            }
            for i in j..m {
                z[(i, c)] -= 2.0 * dot * v[i - j];
            }
        }
    }
    Ok(z)
}

/// Smallest eigenvalue of the dense symmetric pencil `A x = lambda M x`
/// with `M` symmetric positive definite.
pub fn smallest_generalized_eig(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<f64, LinalgError> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(m.nrows(), n);
    if n == 0 {
        return Err(LinalgError::TooLarge { n: 0, cap: 0 });
    }
    let chol = m.clone().cholesky().ok_or(LinalgError::NotSpd)?;
    // C = L^-1 A L^-T, symmetrized against rounding.
    let linv_a = chol.l().solve_lower_triangular(a).ok_or(LinalgError::NotSpd)?;
    let c_t = chol
        .l()
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or(LinalgError::NotSpd)?;
    let c = (&c_t + c_t.transpose()) * 0.5;
    if n <= 800 {
        let eig = nalgebra::SymmetricEigen::new(c);
        Ok(eig.eigenvalues.min())
    } else {
        // Shift-inverted power iteration; the pencils monitored here are
        // positive definite with O(1) smallest eigenvalues.
        let shift = 1e-10 * c.trace().abs().max(1.0) / n as f64;
        let shifted = &c + DMatrix::identity(n, n) * shift;
        let lu = shifted.lu();
        let mut x = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
        let mut lam = f64::INFINITY;
        for _ in 0..1000 {
            let y = lu.solve(&x).ok_or(LinalgError::NotSpd)?;
            let ynorm = y.norm();
            if ynorm == 0.0 {
                return Err(LinalgError::NotSpd);
            }
            let xnew = y / ynorm;
            let lam_new = (xnew.transpose() * &c * &xnew)[(0, 0)];
            let done = (lam_new - lam).abs() <= 1e-11 * lam_new.abs().max(1e-30);
            lam = lam_new;
            x = xnew;
            if done {
                break;
            }
        }
        Ok(lam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn one_by_one() {
        let a = SparseMatrix::from_triplets(1, 1, vec![(0, 0, 2.0)]);
        let x = factor_solve(&a, &[4.0], &SolveOptions::default()).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_zero_row_detected() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 2.0)]);
        let err = factor_solve(&a, &[1.0, 1.0], &SolveOptions::default());
        assert!(matches!(err, Err(LinalgError::Singular { .. })));
        let mut opts = SolveOptions::default();
        opts.force_sparse = true;
        let err = factor_solve(&a, &[1.0, 1.0], &opts);
        assert!(matches!(err, Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn asymmetric_rejected() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)]);
        assert!(matches!(
            factor_solve(&a, &[1.0, 1.0], &SolveOptions::default()),
            Err(LinalgError::NotSymmetric(_))
        ));
    }

    fn random_quasidefinite(
        n1: usize,
        n2: usize,
        rng: &mut SplitMix64,
    ) -> (SparseMatrix, Vec<i8>) {
        let n = n1 + n2;
        let mut trips = Vec::new();
        for i in 0..n1 {
            trips.push((i, i, 1.0 + rng.next_f64()));
        }
        for j in 0..n2 {
            trips.push((n1 + j, n1 + j, -(0.5 + rng.next_f64())));
        }
        for _ in 0..3 * n {
            let i = rng.below(n1);
            let j = n1 + rng.below(n2);
            let v = rng.uniform(-0.4, 0.4);
            trips.push((i, j, v));
            trips.push((j, i, v));
        }
        let signs = (0..n).map(|i| if i < n1 { 1 } else { -1 }).collect();
        (SparseMatrix::from_triplets(n, n, trips), signs)
    }

    #[test]
    fn quasidefinite_batch_residuals() {
        // 200 random symmetric quasi-definite systems up to n = 200.
        let mut rng = SplitMix64::new(99);
        for case in 0..200 {
            let n1 = 2 + rng.below(120);
            let n2 = 1 + rng.below(80);
            let (a, signs) = random_quasidefinite(n1, n2, &mut rng);
            let n = n1 + n2;
            let b: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let opts = SolveOptions {
                signs: Some(signs),
                force_sparse: case % 2 == 0,
                ..Default::default()
            };
            let x = factor_solve(&a, &b, &opts).unwrap();
            let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(ax, bb)| ax - bb).collect();
            let rel = norm2(&r) / norm2(&b);
            assert!(rel <= 1e-10, "case {case}: rel residual {rel:.3e}");
        }
    }

    #[test]
    fn saddle_system_dense_and_sparse_agree() {
        let mut rng = SplitMix64::new(3);
        let (nu, nl) = (40usize, 12usize);
        let n = nu + nl;
        let mut trips = Vec::new();
        for i in 0..nu {
            trips.push((i, i, 1.0));
        }
        for j in 0..nl {
            for i in 0..nu {
                let v = rng.uniform(-1.0, 1.0);
                if v.abs() > 0.6 {
                    trips.push((i, nu + j, v));
                    trips.push((nu + j, i, v));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, n, trips);
        let b: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let signs: Vec<i8> = (0..n).map(|i| if i < nu { 1 } else { -1 }).collect();
        let dense = factor_solve(&a, &b, &SolveOptions::default()).unwrap();
        let sparse = factor_solve(
            &a,
            &b,
            &SolveOptions {
                signs: Some(signs),
                force_sparse: true,
                ..Default::default()
            },
        )
        .unwrap();
        let diff: f64 = dense
            .iter()
            .zip(&sparse)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!(diff / norm2(&dense) < 1e-9);
    }

    #[test]
    fn rank_nullity_basics() {
        let eye = SparseMatrix::from_triplets(3, 3, (0..3).map(|i| (i, i, 1.0)).collect());
        assert_eq!(rank_nullity(&eye, RANK_TOL).unwrap(), (3, 0));
        let zero = SparseMatrix::from_triplets(4, 7, vec![]);
        assert_eq!(rank_nullity(&zero, RANK_TOL).unwrap(), (0, 7));
    }

    #[test]
    fn rank_matches_gaussian_elimination() {
        // Oracle: fraction-free Gaussian elimination rank on integer
        // matrices.
        fn ge_rank(mut m: Vec<Vec<f64>>) -> usize {
            let rows = m.len();
            let cols = m[0].len();
            let mut rank = 0;
            let mut col = 0;
            while rank < rows && col < cols {
                let piv = (rank..rows).max_by(|&a, &b| {
                    m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap()
                });
                let piv = piv.unwrap();
                if m[piv][col].abs() < 1e-9 {
                    col += 1;
                    continue;
                }
                m.swap(rank, piv);
                for r in rank + 1..rows {
                    let f = m[r][col] / m[rank][col];
                    for c in col..cols {
                        m[r][c] -= f * m[rank][c];
                    }
                }
                rank += 1;
                col += 1;
            }
            rank
        }
        let mut rng = SplitMix64::new(1234);
        for _ in 0..100 {
            let rows = 2 + rng.below(8);
            let cols = 2 + rng.below(8);
            let r_target = 1 + rng.below(rows.min(cols));
            // random rank-r integer matrix as product of integer factors
            let mut m = vec![vec![0.0; cols]; rows];
            for _ in 0..r_target {
                let u: Vec<f64> = (0..rows).map(|_| (rng.below(7) as f64) - 3.0).collect();
                let v: Vec<f64> = (0..cols).map(|_| (rng.below(7) as f64) - 3.0).collect();
                for i in 0..rows {
                    for j in 0..cols {
                        m[i][j] += u[i] * v[j];
                    }
                }
            }
            let dense = DMatrix::from_fn(rows, cols, |i, j| m[i][j]);
            let (rank, nullity) = rank_nullity_dense(&dense, RANK_TOL).unwrap();
            assert_eq!(rank, ge_rank(m));
            assert_eq!(nullity, cols - rank);
        }
    }

    #[test]
    fn nullspace_orthonormal_and_annihilates() {
        let mut rng = SplitMix64::new(8);
        let g = DMatrix::from_fn(20, 6, |_, _| rng.uniform(-1.0, 1.0));
        let z = nullspace_of_transpose(&g, 1e-12).unwrap();
        assert_eq!(z.ncols(), 14);
        let gz = g.transpose() * &z;
        assert!(gz.amax() < 1e-12);
        let ztz = z.transpose() * &z;
        assert!((ztz - DMatrix::identity(14, 14)).amax() < 1e-12);
    }

    #[test]
    fn generalized_eig() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0]));
        let m = DMatrix::identity(2, 2);
        assert!((smallest_generalized_eig(&a, &m).unwrap() - 1.0).abs() < 1e-12);
        assert!((smallest_generalized_eig(&m, &m).unwrap() - 1.0).abs() < 1e-12);
        // non-SPD mass rejected
        let bad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(
            smallest_generalized_eig(&a, &bad),
            Err(LinalgError::NotSpd)
        ));
    }
}
