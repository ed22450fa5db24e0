//! Compressed sparse row matrices built from deterministic triplet streams.

use std::io::Write;

#[derive(Clone, Debug)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds CSR from triplets; duplicates are summed. The triplet order
    /// does not affect the result beyond floating-point addition order,
    /// which is fixed by the stable sort.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut entry_rows = Vec::new();
        let mut col_idx: Vec<usize> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for &(r, c, v) in &triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            if entry_rows.last() == Some(&r) && col_idx.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                entry_rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        let mut row_ptr = vec![0usize; nrows + 1];
        for &r in &entry_rows {
            row_ptr[r + 1] += 1;
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[r] = acc;
        }
        y
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v * x[r];
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut trips = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                trips.push((*c, r, *v));
            }
        }
        SparseMatrix::from_triplets(self.ncols, self.nrows, trips)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                m[(r, *c)] += v;
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst = 0.0f64;
        for r in 0..self.nrows.min(self.ncols) {
            let (ca, va) = self.row(r);
            let (cb, vb) = t.row(r);
            let mut ia = 0;
            let mut ib = 0;
            while ia < ca.len() || ib < cb.len() {
                let col_a = ca.get(ia).copied().unwrap_or(usize::MAX);
                let col_b = cb.get(ib).copied().unwrap_or(usize::MAX);
                if col_a == col_b {
                    worst = worst.max((va[ia] - vb[ib]).abs());
                    ia += 1;
                    ib += 1;
                } else if col_a < col_b {
                    worst = worst.max(va[ia].abs());
                    ia += 1;
                } else {
                    worst = worst.max(vb[ib].abs());
                    ib += 1;
                }
            }
        }
        worst
    }

    /// Writes `row col value` lines, 0-based, full precision.
    pub fn write_coo<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {}", r, c, v)?;
            }
        }
        Ok(())
    }

    /// Upper triangle (including diagonal) in CSC order, which for a
    /// symmetric matrix is the CSR of the lower triangle transposed.
    pub fn upper_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let n = self.nrows;
        let mut counts = vec![0usize; n + 1];
        for r in 0..n {
            let (cols, _) = self.row(r);
            for &c in cols {
                if c >= r {
                    counts[c + 1] += 1;
                }
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let mut ap = counts.clone();
        let nnz = ap[n];
        let mut ai = vec![0usize; nnz];
        let mut ax = vec![0.0; nnz];
        let mut next = ap.clone();
        for r in 0..n {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                if *c >= r {
                    let slot = next[*c];
                    ai[slot] = r;
                    ax[slot] = *v;
                    next[*c] += 1;
                }
            }
        }
        ap.truncate(n + 1);
        (ap, ai, ax)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_merge_and_matvec() {
        let m = SparseMatrix::from_triplets(
            3,
            2,
            vec![(0, 1, 2.0), (2, 0, 1.0), (0, 1, 3.0), (1, 0, -1.0)],
        );
        assert_eq!(m.nnz(), 3);
        let y = m.matvec(&[1.0, 10.0]);
        assert_eq!(y, vec![50.0, -1.0, 1.0]);
        let yt = m.matvec_transpose(&[1.0, 1.0, 1.0]);
        assert_eq!(yt, vec![0.0, 5.0]);
    }

    #[test]
    fn upper_csc_roundtrip() {
        let m = SparseMatrix::from_triplets(
            3,
            3,
            vec![
                (0, 0, 2.0),
                (0, 1, 1.0),
                (1, 0, 1.0),
                (1, 1, 3.0),
                (2, 2, 5.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
            ],
        );
        let (ap, ai, ax) = m.upper_csc();
        assert_eq!(ap, vec![0, 1, 3, 5]);
        assert_eq!(ai, vec![0, 0, 1, 1, 2]);
        assert_eq!(ax, vec![2.0, 1.0, 3.0, -1.0, 5.0]);
        assert!(m.asymmetry() < 1e-15);
    }

    #[test]
    fn coo_export() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.5), (1, 0, -2.0)]);
        let mut buf = Vec::new();
        m.write_coo(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 0 1.5\n1 0 -2\n");
    }
}
