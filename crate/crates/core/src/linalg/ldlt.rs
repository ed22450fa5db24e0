//! Sparse LDL^T for symmetric (possibly indefinite) matrices.
//!
//! Up-looking factorization over the elimination tree, with an AMD
//! fill-reducing ordering and signed dynamic regularization: a pivot whose
//! magnitude falls below `eps` is replaced by `sign * delta`, which makes
//! saddle-point systems factorizable without 2x2 pivots; the resulting
//! perturbation is removed afterwards by iterative refinement against the
//! unperturbed matrix.

use super::sparse::SparseMatrix;
use super::LinalgError;

pub struct SymmetricFactor {
    n: usize,
    /// perm[k] = original index placed at position k.
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    /// Positions whose pivot was regularized.
    pub regularized: Vec<usize>,
}

fn amd_order(n: usize, a: &SparseMatrix) -> Vec<usize> {
    if n <= 1 {
        return (0..n).collect();
    }
    // AMD wants CSC of the full pattern; the matrix is symmetric so CSR
    // serves directly. Diagonal entries are padded in so the pattern never
    // has fewer nonzeros than rows.
    let mut ap = Vec::with_capacity(n + 1);
    let mut ai = Vec::with_capacity(a.nnz() + n);
    ap.push(0usize);
    for r in 0..n {
        let (cols, _) = a.row(r);
        let mut has_diag = false;
        for &c in cols {
            if c == r {
                has_diag = true;
            }
            ai.push(c);
        }
        if !has_diag {
            ai.push(r);
        }
        ap.push(ai.len());
    }
    match amd::order::<usize>(n, &ap, &ai, &amd::Control::default()) {
        Ok((p, _pinv, _info)) => p,
        Err(_) => (0..n).collect(),
    }
}

impl SymmetricFactor {
    pub fn new(a: &SparseMatrix, signs: Option<&[i8]>) -> Result<Self, LinalgError> {
        let n = a.nrows;
        assert_eq!(n, a.ncols);
        let perm = amd_order(n, a);
        let mut inv = vec![0usize; n];
        for (k, &orig) in perm.iter().enumerate() {
            inv[orig] = k;
        }

        // Permuted upper triangle in CSC.
        let mut trips = Vec::with_capacity(a.nnz());
        for r in 0..n {
            let (cols, vals) = a.row(r);
            for (c, v) in cols.iter().zip(vals) {
                let (pr, pc) = (inv[r], inv[*c]);
                if pr <= pc {
                    trips.push((pc, pr, *v)); // column-major storage below
                }
            }
        }
        trips.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        let mut entry_cols: Vec<usize> = Vec::with_capacity(trips.len());
        let mut ai: Vec<usize> = Vec::with_capacity(trips.len());
        let mut ax: Vec<f64> = Vec::with_capacity(trips.len());
        for &(c, r, v) in &trips {
            if entry_cols.last() == Some(&c) && ai.last() == Some(&r) {
                *ax.last_mut().unwrap() += v;
            } else {
                entry_cols.push(c);
                ai.push(r);
                ax.push(v);
            }
        }
        let mut ap = vec![0usize; n + 1];
        for &c in &entry_cols {
            ap[c + 1] += 1;
        }
        for c in 0..n {
            ap[c + 1] += ap[c];
        }

        // Elimination tree and column counts.
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for j in 0..n {
            flag[j] = j;
            for p in ap[j]..ap[j + 1] {
                let mut i = ai[p];
                if i == j {
                    continue;
                }
                while flag[i] != j {
                    if parent[i] == usize::MAX {
                        parent[i] = j;
                    }
                    lnz[i] += 1;
                    flag[i] = j;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for j in 0..n {
            lp[j + 1] = lp[j] + lnz[j];
        }
        let nnz_l = lp[n];
        let mut li = vec![0usize; nnz_l];
        let mut lx = vec![0.0f64; nnz_l];
        let mut lnext = lp.clone();

        let amax = a.max_abs().max(1e-300);
        let eps = 1e-13 * amax;
        let delta = 1e-8 * amax;
        let mut d = vec![0.0f64; n];
        let mut dinv = vec![0.0f64; n];
        let mut regularized = Vec::new();

        let mut y = vec![0.0f64; n];
        let mut pattern = vec![0usize; n];
        let mut walk = vec![0usize; n];
        let mut flag2 = vec![usize::MAX; n];

        for k in 0..n {
            flag2[k] = k;
            let mut top = n;
            let mut dk = 0.0;
            for p in ap[k]..ap[k + 1] {
                let i = ai[p];
                if i == k {
                    dk = ax[p];
                    continue;
                }
                y[i] += ax[p];
                let mut len = 0;
                let mut node = i;
                while flag2[node] != k {
                    walk[len] = node;
                    len += 1;
                    flag2[node] = k;
                    node = parent[node];
                }
                // Reverse the walked path onto the pattern stack so that
                // pattern[top..] is in ascending elimination order.
                for l in 0..len {
                    top -= 1;
                    pattern[top] = walk[len - 1 - l];
                }
            }
            for idx in top..n {
                let i = pattern[idx];
                let yi = y[i];
                y[i] = 0.0;
                for p in lp[i]..lnext[i] {
                    y[li[p]] -= lx[p] * yi;
                }
                let lki = yi * dinv[i];
                dk -= lki * yi;
                li[lnext[i]] = k;
                lx[lnext[i]] = lki;
                lnext[i] += 1;
            }
            if dk.abs() < eps {
                let sign = signs
                    .map(|s| if s[perm[k]] < 0 { -1.0 } else { 1.0 })
                    .unwrap_or(if dk < 0.0 { -1.0 } else { 1.0 });
                dk = sign * delta;
                regularized.push(k);
            }
            d[k] = dk;
            dinv[k] = 1.0 / dk;
        }

        Ok(Self {
            n,
            perm,
            lp,
            li,
            lx,
            d: d.clone(),
            dinv,
            regularized,
        })
    }

    /// One triangular solve pass `x = P^T (L D L^T)^{-1} P b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z: Vec<f64> = (0..n).map(|k| b[self.perm[k]]).collect();
        for j in 0..n {
            let zj = z[j];
            if zj != 0.0 {
                for p in self.lp[j]..self.lp[j + 1] {
                    z[self.li[p]] -= self.lx[p] * zj;
                }
            }
        }
        for j in 0..n {
            z[j] *= self.dinv[j];
        }
        for j in (0..n).rev() {
            let mut zj = z[j];
            for p in self.lp[j]..self.lp[j + 1] {
                zj -= self.lx[p] * z[self.li[p]];
            }
            z[j] = zj;
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.perm[k]] = z[k];
        }
        x
    }

    pub fn first_regularized(&self) -> Option<usize> {
        self.regularized.first().map(|&k| self.perm[k])
    }

    /// Smallest pivot magnitude, a crude singularity indicator.
    pub fn min_pivot(&self) -> (usize, f64) {
        let mut arg = 0;
        let mut min = f64::INFINITY;
        for (k, &v) in self.d.iter().enumerate() {
            if v.abs() < min {
                min = v.abs();
                arg = k;
            }
        }
        (self.perm.get(arg).copied().unwrap_or(0), min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_spd(n: usize, rng: &mut SplitMix64) -> SparseMatrix {
        // diagonally dominant band matrix
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((i, i, 4.0 + rng.next_f64()));
            if i + 1 < n {
                let v = rng.uniform(-1.0, 1.0);
                trips.push((i, i + 1, v));
                trips.push((i + 1, i, v));
            }
            if i + 7 < n {
                let v = rng.uniform(-0.5, 0.5);
                trips.push((i, i + 7, v));
                trips.push((i + 7, i, v));
            }
        }
        SparseMatrix::from_triplets(n, n, trips)
    }

    #[test]
    fn spd_solve() {
        let mut rng = SplitMix64::new(2);
        let a = random_spd(50, &mut rng);
        let b: Vec<f64> = (0..50).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let f = SymmetricFactor::new(&a, None).unwrap();
        let x = f.solve(&b);
        let r: Vec<f64> = a
            .matvec(&x)
            .iter()
            .zip(&b)
            .map(|(ax, bb)| ax - bb)
            .collect();
        let rel = r.iter().map(|v| v * v).sum::<f64>().sqrt()
            / b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(rel < 1e-12, "relative residual {rel:.3e}");
        assert!(f.regularized.is_empty());
    }

    #[test]
    fn saddle_point_with_regularization() {
        // [I G; G^T 0] with random full-rank G.
        let mut rng = SplitMix64::new(5);
        let (nu, nl) = (30usize, 10usize);
        let n = nu + nl;
        let mut trips = Vec::new();
        for i in 0..nu {
            trips.push((i, i, 1.0));
        }
        for j in 0..nl {
            for i in 0..nu {
                let v = rng.uniform(-1.0, 1.0);
                if v.abs() > 0.5 {
                    trips.push((i, nu + j, v));
                    trips.push((nu + j, i, v));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, n, trips);
        let b: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let signs: Vec<i8> = (0..n).map(|i| if i < nu { 1 } else { -1 }).collect();
        let f = SymmetricFactor::new(&a, Some(&signs)).unwrap();
        let mut x = f.solve(&b);
        // one refinement step
        for _ in 0..2 {
            let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(ax, bb)| bb - ax).collect();
            let dx = f.solve(&r);
            for i in 0..n {
                x[i] += dx[i];
            }
        }
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(ax, bb)| ax - bb).collect();
        let rel = r.iter().map(|v| v * v).sum::<f64>().sqrt()
            / b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(rel < 1e-11, "saddle residual {rel:.3e}");
    }
}
