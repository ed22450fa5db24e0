//! Dense trivariate polynomial algebra in tet-local coordinates.
//!
//! Local shape functions are stored as polynomials in `xi = x - x_T` (the
//! offset from the tet barycenter), which keeps differentiation exact and the
//! `x`-dependent shape spaces affine-centered. Monomials are ordered
//! degree-major with a fixed within-degree order, so coefficient vectors are
//! directly comparable.

use nalgebra::{Matrix3, Vector3};

pub type V3 = Vector3<f64>;
pub type M3 = Matrix3<f64>;

/// Number of trivariate monomials of total degree at most `d`.
pub fn dim_p3(d: usize) -> usize {
    (d + 1) * (d + 2) * (d + 3) / 6
}

/// Number of bivariate monomials of total degree at most `d`.
pub fn dim_p2(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

fn mono_index(i: usize, j: usize, k: usize) -> usize {
    let d = i + j + k;
    let mut idx = dim_p3(d.wrapping_sub(1).min(d)); // dim of degrees < d
    if d == 0 {
        idx = 0;
    }
    // within degree d: i descends from d, then j descends.
    let mut off = 0;
    for ii in (i + 1..=d).rev() {
        off += d - ii + 1;
    }
    off += d - i - j;
    idx + off
}

/// Exponents of the monomial at a given flat index for `deg`-bounded storage.
fn exponents(deg: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(dim_p3(deg));
    for d in 0..=deg {
        for i in (0..=d).rev() {
            for j in (0..=d - i).rev() {
                out.push([i, j, d - i - j]);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Poly3 {
    pub deg: usize,
    pub c: Vec<f64>,
}

impl Poly3 {
    pub fn zero(deg: usize) -> Self {
        Self {
            deg,
            c: vec![0.0; dim_p3(deg)],
        }
    }

    pub fn constant(v: f64) -> Self {
        let mut p = Self::zero(0);
        p.c[0] = v;
        p
    }

    pub fn monomial(i: usize, j: usize, k: usize, coeff: f64) -> Self {
        let mut p = Self::zero(i + j + k);
        p.c[mono_index(i, j, k)] = coeff;
        p
    }

    pub fn coeff(&self, i: usize, j: usize, k: usize) -> f64 {
        if i + j + k > self.deg {
            0.0
        } else {
            self.c[mono_index(i, j, k)]
        }
    }

    pub fn grow(&mut self, deg: usize) {
        if deg > self.deg {
            let mut c = vec![0.0; dim_p3(deg)];
            c[..self.c.len()].copy_from_slice(&self.c);
            self.c = c;
            self.deg = deg;
        }
    }

    pub fn add_scaled(&mut self, other: &Poly3, s: f64) {
        self.grow(other.deg);
        for (idx, &v) in other.c.iter().enumerate() {
            self.c[idx] += s * v;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.c {
            *v *= s;
        }
    }

    pub fn mul(&self, other: &Poly3) -> Poly3 {
        let deg = self.deg + other.deg;
        let mut out = Poly3::zero(deg);
        let ea = exponents(self.deg);
        let eb = exponents(other.deg);
        for (ia, &a) in self.c.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let [i1, j1, k1] = ea[ia];
            for (ib, &b) in other.c.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let [i2, j2, k2] = eb[ib];
                out.c[mono_index(i1 + i2, j1 + j2, k1 + k2)] += a * b;
            }
        }
        out
    }

    /// Multiplies by the coordinate monomial `xi_axis`.
    pub fn mul_coord(&self, axis: usize) -> Poly3 {
        let mut out = Poly3::zero(self.deg + 1);
        let ea = exponents(self.deg);
        for (ia, &a) in self.c.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let mut e = ea[ia];
            e[axis] += 1;
            out.c[mono_index(e[0], e[1], e[2])] += a;
        }
        out
    }

    pub fn diff(&self, axis: usize) -> Poly3 {
        let deg = self.deg.saturating_sub(1);
        let mut out = Poly3::zero(deg);
        let ea = exponents(self.deg);
        for (ia, &a) in self.c.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let mut e = ea[ia];
            if e[axis] == 0 {
                continue;
            }
            let p = e[axis] as f64;
            e[axis] -= 1;
            out.c[mono_index(e[0], e[1], e[2])] += a * p;
        }
        out
    }

    pub fn eval(&self, xi: &V3) -> f64 {
        // Horner-free evaluation with cached powers; degrees stay small.
        let mut px = [1.0f64; 8];
        let mut py = [1.0f64; 8];
        let mut pz = [1.0f64; 8];
        for d in 1..=self.deg.min(7) {
            px[d] = px[d - 1] * xi.x;
            py[d] = py[d - 1] * xi.y;
            pz[d] = pz[d - 1] * xi.z;
        }
        let mut acc = 0.0;
        let mut idx = 0;
        for d in 0..=self.deg {
            for i in (0..=d).rev() {
                for j in (0..=d - i).rev() {
                    let k = d - i - j;
                    let c = self.c[idx];
                    if c != 0.0 {
                        acc += c * px[i] * py[j] * pz[k];
                    }
                    idx += 1;
                }
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug)]
pub struct VecPoly3(pub [Poly3; 3]);

impl VecPoly3 {
    pub fn zero(deg: usize) -> Self {
        Self([Poly3::zero(deg), Poly3::zero(deg), Poly3::zero(deg)])
    }

    pub fn constant(v: &V3) -> Self {
        Self([
            Poly3::constant(v.x),
            Poly3::constant(v.y),
            Poly3::constant(v.z),
        ])
    }

    pub fn from_scaled(p: &Poly3, v: &V3) -> Self {
        let mut out = Self::zero(p.deg);
        for a in 0..3 {
            out.0[a].add_scaled(p, v[a]);
        }
        out
    }

    pub fn add_scaled(&mut self, other: &VecPoly3, s: f64) {
        for a in 0..3 {
            self.0[a].add_scaled(&other.0[a], s);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in 0..3 {
            self.0[a].scale(s);
        }
    }

    pub fn eval(&self, xi: &V3) -> V3 {
        V3::new(self.0[0].eval(xi), self.0[1].eval(xi), self.0[2].eval(xi))
    }

    pub fn curl(&self) -> VecPoly3 {
        let mut c0 = self.0[2].diff(1);
        c0.add_scaled(&self.0[1].diff(2), -1.0);
        let mut c1 = self.0[0].diff(2);
        c1.add_scaled(&self.0[2].diff(0), -1.0);
        let mut c2 = self.0[1].diff(0);
        c2.add_scaled(&self.0[0].diff(1), -1.0);
        VecPoly3([c0, c1, c2])
    }

    pub fn div(&self) -> Poly3 {
        let mut d = self.0[0].diff(0);
        d.add_scaled(&self.0[1].diff(1), 1.0);
        d.add_scaled(&self.0[2].diff(2), 1.0);
        d
    }

    /// Jacobian: `grad(v)[i][j] = d v_i / d xi_j`.
    pub fn grad(&self) -> MatPoly3 {
        let row = |i: usize| [self.0[i].diff(0), self.0[i].diff(1), self.0[i].diff(2)];
        MatPoly3([row(0), row(1), row(2)])
    }

    /// `xi × v` with `xi` the local coordinate field.
    pub fn coord_cross(&self) -> VecPoly3 {
        let x = 0;
        let y = 1;
        let z = 2;
        let mut c0 = self.0[2].mul_coord(y);
        c0.add_scaled(&self.0[1].mul_coord(z), -1.0);
        let mut c1 = self.0[0].mul_coord(z);
        c1.add_scaled(&self.0[2].mul_coord(x), -1.0);
        let mut c2 = self.0[1].mul_coord(x);
        c2.add_scaled(&self.0[0].mul_coord(y), -1.0);
        VecPoly3([c0, c1, c2])
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, p| m.max(p.max_abs()))
    }
}

#[derive(Clone, Debug)]
pub struct MatPoly3(pub [[Poly3; 3]; 3]);

impl MatPoly3 {
    pub fn zero(deg: usize) -> Self {
        let row = || [Poly3::zero(deg), Poly3::zero(deg), Poly3::zero(deg)];
        Self([row(), row(), row()])
    }

    pub fn from_scaled(p: &Poly3, m: &M3) -> Self {
        let mut out = Self::zero(p.deg);
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j].add_scaled(p, m[(i, j)]);
            }
        }
        out
    }

    pub fn add_scaled(&mut self, other: &MatPoly3, s: f64) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j].add_scaled(&other.0[i][j], s);
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j].scale(s);
            }
        }
    }

    pub fn eval(&self, xi: &V3) -> M3 {
        M3::from_fn(|i, j| self.0[i][j].eval(xi))
    }

    pub fn row(&self, i: usize) -> VecPoly3 {
        VecPoly3([self.0[i][0].clone(), self.0[i][1].clone(), self.0[i][2].clone()])
    }

    pub fn set_row(&mut self, i: usize, v: VecPoly3) {
        let [a, b, c] = v.0;
        self.0[i] = [a, b, c];
    }

    /// Row-wise divergence.
    pub fn row_div(&self) -> VecPoly3 {
        VecPoly3([self.row(0).div(), self.row(1).div(), self.row(2).div()])
    }

    /// Row-wise curl.
    pub fn row_curl(&self) -> MatPoly3 {
        let mut out = Self::zero(0);
        for i in 0..3 {
            out.set_row(i, self.row(i).curl());
        }
        out
    }

    /// Traceless part `m - tr(m)/3 I`.
    pub fn dev(&self) -> MatPoly3 {
        let mut tr = self.0[0][0].clone();
        tr.add_scaled(&self.0[1][1], 1.0);
        tr.add_scaled(&self.0[2][2], 1.0);
        let mut out = self.clone();
        for i in 0..3 {
            out.0[i][i].add_scaled(&tr, -1.0 / 3.0);
        }
        out
    }

    pub fn trace(&self) -> Poly3 {
        let mut tr = self.0[0][0].clone();
        tr.add_scaled(&self.0[1][1], 1.0);
        tr.add_scaled(&self.0[2][2], 1.0);
        tr
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0, |m, p| m.max(p.max_abs()))
    }
}

/// `dev(m) = m - tr(m)/3 I` for constant matrices.
pub fn dev(m: &M3) -> M3 {
    let t = m.trace() / 3.0;
    let mut out = *m;
    out[(0, 0)] -= t;
    out[(1, 1)] -= t;
    out[(2, 2)] -= t;
    out
}

/// Skew matrix with `mskw(w) n = w × n` and `div mskw(w) = -curl w`.
pub fn mskw(w: &V3) -> M3 {
    M3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// `mskw` of the position field `x = xi + center`, as a matrix polynomial
/// in local coordinates.
pub fn mskw_position(center: &V3) -> MatPoly3 {
    let mut out = MatPoly3::from_scaled(&Poly3::constant(1.0), &mskw(center));
    // mskw of xi itself: entries are +-coordinate monomials.
    let x = Poly3::monomial(1, 0, 0, 1.0);
    let y = Poly3::monomial(0, 1, 0, 1.0);
    let z = Poly3::monomial(0, 0, 1, 1.0);
    out.0[0][1].add_scaled(&z, -1.0);
    out.0[0][2].add_scaled(&y, 1.0);
    out.0[1][0].add_scaled(&z, 1.0);
    out.0[1][2].add_scaled(&x, -1.0);
    out.0[2][0].add_scaled(&y, -1.0);
    out.0[2][1].add_scaled(&x, 1.0);
    out
}

/// Barycentric coordinates of a tet as degree-1 local polynomials.
pub fn barycentric_polys(geom: &crate::mesh::TetGeometry) -> [Poly3; 4] {
    std::array::from_fn(|i| {
        let g = geom.grad_lambda[i];
        let mut p = Poly3::zero(1);
        p.c[0] = 0.25;
        p.c[mono_index(1, 0, 0)] = g.x;
        p.c[mono_index(0, 1, 0)] = g.y;
        p.c[mono_index(0, 0, 1)] = g.z;
        p
    })
}

/// All scalar monomials `xi^a` with `|a| <= deg`, as polynomials.
pub fn monomial_basis(deg: usize) -> Vec<Poly3> {
    exponents(deg)
        .into_iter()
        .map(|[i, j, k]| Poly3::monomial(i, j, k, 1.0))
        .collect()
}

/// Monomials of exact total degree `deg`.
pub fn homogeneous_monomials(deg: usize) -> Vec<Poly3> {
    exponents(deg)
        .into_iter()
        .filter(|e| e[0] + e[1] + e[2] == deg)
        .map(|[i, j, k]| Poly3::monomial(i, j, k, 1.0))
        .collect()
}
