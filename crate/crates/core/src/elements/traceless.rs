//! Traceless tensor element with tangential-normal continuity.
//!
//! Shape space `P_k(T; T)` is spanned by scalar monomials times the
//! vertex-wise intrinsic basis `dev(grad lambda_i (x) t_{il})`. DoFs are
//! face moments of the two tangential-normal components `t_i^T tau n_F`
//! against `P_k(F)` plus interior moments against `P_{k-1}(T; T)` realized
//! through the face-wise dual basis `t_{mi} (x) grad lambda_l`.

use super::*;
use crate::poly::{dev, monomial_basis};
use crate::polyquad::{basis_scalar, integrate_tet};

/// `(i, j, m)` completing the cyclic permutation `(i j l m)` of `(0 1 2 3)`
/// for each `l`.
pub const CYCLIC: [(usize, usize, usize); 4] = [(2, 3, 1), (3, 0, 2), (0, 1, 3), (1, 2, 0)];

/// The two intrinsic dual bases of the traceless matrices on a tet.
///
/// `basis[2l + s]` is `dev(grad lambda_p (x) t_{pl})` for `p = i, j`;
/// `dual[2l + s]` is `t_{mp} (x) grad lambda_l`. Their Frobenius pairing is
/// the 8x8 identity.
#[derive(Clone, Debug)]
pub struct TracelessFrame {
    pub basis: [M3; 8],
    pub dual: [M3; 8],
}

impl TracelessFrame {
    pub fn new(geom: &TetGeometry) -> Self {
        let mut basis = [M3::zeros(); 8];
        let mut dual = [M3::zeros(); 8];
        for l in 0..4 {
            let (i, j, m) = CYCLIC[l];
            for (s, p) in [i, j].into_iter().enumerate() {
                let t_pl = geom.edge_vector(p, l);
                let t_mp = geom.edge_vector(m, p);
                basis[2 * l + s] = dev(&(geom.grad_lambda[p] * t_pl.transpose()));
                dual[2 * l + s] = t_mp * geom.grad_lambda[l].transpose();
            }
        }
        Self { basis, dual }
    }

    /// Frobenius pairing matrix of `basis` against `dual`; equals `I_8`.
    pub fn pairing(&self) -> nalgebra::SMatrix<f64, 8, 8> {
        nalgebra::SMatrix::<f64, 8, 8>::from_fn(|a, b| self.basis[a].dot(&self.dual[b]))
    }

    /// Max-norm distance of the pairing from the identity.
    pub fn duality_defect(&self) -> f64 {
        (self.pairing() - nalgebra::SMatrix::<f64, 8, 8>::identity())
            .abs()
            .max()
    }
}

/// Traceless tangential-normal element of degree `k` on one tet.
pub fn sigma_tn_local(k: usize, ents: &TetEntities) -> Result<LocalElement, ElementError> {
    if k > 3 {
        return Err(ElementError::UnsupportedOrder {
            family: "SigmaTn".into(),
            detail: format!("degree {k} > 3"),
        });
    }
    let family = Family::SigmaTn { k };
    let geom = &ents.geom;
    let frame = TracelessFrame::new(geom);

    let monos = monomial_basis(k);
    let mut shapes = Vec::with_capacity(8 * monos.len());
    for m in &monos {
        for b in 0..8 {
            shapes.push(Shape::Matrix(MatPoly3::from_scaled(m, &frame.basis[b])));
        }
    }

    let mut dofs = Vec::new();
    let face_basis = basis_scalar(k, Domain::Tri);
    for kf in 0..4 {
        let fr = &ents.faces[kf];
        let n = fr.normal;
        for (mi, e) in face_basis.exponents.iter().enumerate() {
            let q = FaceScalarPoly {
                exps: vec![[e[0], e[1], e[2]]],
                coeffs: vec![1.0],
            };
            for (s, t) in [fr.t1, fr.t2].into_iter().enumerate() {
                dofs.push(Dof {
                    entity: Entity::Face(kf),
                    index_on_entity: 2 * mi + s,
                    spec: DofSpec::FaceTnMoment {
                        frame: fr.clone(),
                        dir: t * n.transpose(),
                        q: q.clone(),
                    },
                });
            }
        }
    }
    if k >= 1 {
        let interior_monos = monomial_basis(k - 1);
        let mut idx = 0;
        for m in &interior_monos {
            for b in 0..8 {
                dofs.push(Dof {
                    entity: Entity::Cell,
                    index_on_entity: idx,
                    spec: DofSpec::CellMoment {
                        test: Shape::Matrix(MatPoly3::from_scaled(m, &frame.dual[b])),
                    },
                });
                idx += 1;
            }
        }
    }

    let nodal = build_nodal(family, geom, &geom.barycenter, &dofs, &shapes)?;
    Ok(LocalElement {
        family,
        center: geom.barycenter,
        dofs,
        shapes,
        nodal,
    })
}

/// Basis of the tangential-normal bubble space of degree `k`: traceless
/// polynomials whose trace `n_F x tau n_F` vanishes on all four faces.
///
/// Dimension `8 dim P_{k-1}(T)`, spanned vertex-wise by
/// `P_{k-1}(T) lambda_l dev(n_p (x) t_{pl})`.
pub fn bubble_basis(k: usize, geom: &TetGeometry) -> Vec<MatPoly3> {
    if k == 0 {
        return Vec::new();
    }
    let lam = crate::poly::barycentric_polys(geom);
    let monos = monomial_basis(k - 1);
    let mut out = Vec::with_capacity(8 * monos.len());
    for m in &monos {
        for l in 0..4 {
            let (i, j, _) = CYCLIC[l];
            for p in [i, j] {
                // Unit outward normal of the face opposite vertex p.
                let n_p = -geom.grad_lambda[p].normalize();
                let t_pl = geom.edge_vector(p, l);
                let mat = dev(&(n_p * t_pl.transpose()));
                let factor = m.mul(&lam[l]);
                out.push(MatPoly3::from_scaled(&factor, &mat));
            }
        }
    }
    out
}

/// Rank of a set of matrix polynomials via coefficient Gram spectrum.
pub fn matpoly_rank(set: &[MatPoly3]) -> usize {
    if set.is_empty() {
        return 0;
    }
    let deg = set
        .iter()
        .map(|m| m.0.iter().flatten().map(|p| p.deg).max().unwrap())
        .max()
        .unwrap();
    let width = crate::poly::dim_p3(deg);
    let n = set.len();
    let mut a = DMatrix::zeros(n, 9 * width);
    for (r, m) in set.iter().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                let mut p = m.0[i][j].clone();
                p.grow(deg);
                for (c, &v) in p.c.iter().enumerate() {
                    a[(r, (3 * i + j) * width + c)] = v;
                }
            }
        }
    }
    let svd = a.svd(false, false);
    let smax = svd.singular_values.max();
    svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count()
}

/// L2 norm of `n_F x tau n_F` over the four faces, for bubble checks.
pub fn tn_trace_norm(m: &MatPoly3, ents: &TetEntities) -> f64 {
    let mut acc: f64 = 0.0;
    let center = ents.geom.barycenter;
    for fr in &ents.faces {
        let n = fr.normal;
        let rule = quadrature(Domain::Tri, 2 * 4).unwrap();
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let x = fr.point_from_lambda(&[p[0], p[1], p[2]]);
            let tau = m.eval(&(x - center));
            let tn = n.cross(&(tau * n));
            acc += w * 2.0 * fr.area * tn.norm_squared();
        }
    }
    acc.sqrt()
}

#[allow(dead_code)]
pub(crate) fn volume_gram(geom: &TetGeometry) -> impl Fn(&Shape, &Shape) -> f64 + '_ {
    move |a: &Shape, b: &Shape| {
        let deg = a.degree() + b.degree();
        let c = geom.barycenter;
        integrate_tet(geom, deg, |x| {
            let xi = x - c;
            a.eval(&xi).pair(&b.eval(&xi))
        }) / geom.volume
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    pub(crate) fn random_shape_regular_tet(rng: &mut SplitMix64) -> [V3; 4] {
        loop {
            let v: [V3; 4] = std::array::from_fn(|_| {
                V3::new(
                    rng.uniform(0.0, 1.0),
                    rng.uniform(0.0, 1.0),
                    rng.uniform(0.0, 1.0),
                )
            });
            let vol = (v[1] - v[0]).cross(&(v[2] - v[0])).dot(&(v[3] - v[0])) / 6.0;
            if vol < 0.02 {
                continue;
            }
            let g = TetGeometry::new(v);
            if g.diameter / g.inradius() < 15.0 {
                return v;
            }
        }
    }

    #[test]
    fn frame_duality_is_identity() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..100 {
            let verts = random_shape_regular_tet(&mut rng);
            let frame = TracelessFrame::new(&TetGeometry::new(verts));
            let p = frame.pairing();
            let err = (p - nalgebra::SMatrix::<f64, 8, 8>::identity()).abs().max();
            assert!(err < 1e-13, "duality defect {err:.3e}");
            for b in 0..8 {
                assert!(frame.basis[b].trace().abs() < 1e-13);
            }
        }
    }

    #[test]
    fn sigma_dof_counts() {
        let ents = TetEntities::from_verts([
            V3::new(0.0, 0.0, 0.0),
            V3::new(1.0, 0.0, 0.0),
            V3::new(0.0, 1.0, 0.0),
            V3::new(0.0, 0.0, 1.0),
        ]);
        let e0 = sigma_tn_local(0, &ents).unwrap();
        assert_eq!(e0.dim(), 8);
        let e1 = sigma_tn_local(1, &ents).unwrap();
        assert_eq!(e1.dim(), 32); // 24 face + 8 interior
        let e2 = sigma_tn_local(2, &ents).unwrap();
        assert_eq!(e2.dim(), 80);
    }

    #[test]
    fn reproduces_frame_member() {
        // Interpolating dev(grad lambda_0 (x) t_{02}) returns it exactly.
        let mut rng = SplitMix64::new(7);
        let verts = random_shape_regular_tet(&mut rng);
        let ents = TetEntities::from_verts(verts);
        let geom = &ents.geom;
        let el = sigma_tn_local(1, &ents).unwrap();
        let target = dev(&(geom.grad_lambda[0] * geom.edge_vector(0, 2).transpose()));
        let mut f = |_x: &V3| Value::Matrix(target);
        let mut combo = MatPoly3::zero(0);
        for (d, nod) in el.dofs.iter().zip(&el.nodal) {
            let c = d.apply(geom, 8, &mut f);
            if let Shape::Matrix(m) = nod {
                combo.add_scaled(m, c);
            }
        }
        for _ in 0..10 {
            let xi = V3::new(
                rng.uniform(-0.2, 0.2),
                rng.uniform(-0.2, 0.2),
                rng.uniform(-0.2, 0.2),
            );
            let err = (combo.eval(&xi) - target).abs().max();
            assert!(err < 1e-11, "reproduction error {err:.3e}");
        }
    }

    #[test]
    fn traceless_everywhere() {
        let mut rng = SplitMix64::new(20);
        let ents = TetEntities::from_verts(random_shape_regular_tet(&mut rng));
        for k in 0..=2 {
            let el = sigma_tn_local(k, &ents).unwrap();
            for s in &el.nodal {
                if let Shape::Matrix(m) = s {
                    assert!(m.trace().max_abs() < 1e-12 * (1.0 + m.max_abs()));
                }
            }
        }
    }

    #[test]
    fn bubble_space() {
        let mut rng = SplitMix64::new(5);
        let ents = TetEntities::from_verts(random_shape_regular_tet(&mut rng));
        let geom = &ents.geom;
        assert!(bubble_basis(0, geom).is_empty());

        let b1 = bubble_basis(1, geom);
        assert_eq!(b1.len(), 8);
        for m in &b1 {
            assert!(tn_trace_norm(m, &ents) < 1e-13 * (1.0 + m.max_abs()));
            assert!(m.trace().max_abs() < 1e-13 * (1.0 + m.max_abs()));
        }
        assert_eq!(matpoly_rank(&b1), 8);

        let b2 = bubble_basis(2, geom);
        assert_eq!(b2.len(), 32);
        assert_eq!(matpoly_rank(&b2), 32);
        for m in &b2 {
            assert!(tn_trace_norm(m, &ents) < 1e-13 * (1.0 + m.max_abs()));
        }
    }

    #[test]
    fn bubble_span_same_with_grad_lambda() {
        // Replacing the unit normals by the parallel barycentric gradients
        // spans the same space: the union has the same rank.
        let mut rng = SplitMix64::new(9);
        let ents = TetEntities::from_verts(random_shape_regular_tet(&mut rng));
        let geom = &ents.geom;
        let lam = crate::poly::barycentric_polys(geom);
        let mut union = bubble_basis(2, geom);
        let base = union.len();
        for m in monomial_basis(1) {
            for l in 0..4 {
                let (i, j, _) = CYCLIC[l];
                for p in [i, j] {
                    let mat = dev(&(geom.grad_lambda[p] * geom.edge_vector(p, l).transpose()));
                    let factor = m.mul(&lam[l]);
                    union.push(MatPoly3::from_scaled(&factor, &mat));
                }
            }
        }
        assert_eq!(matpoly_rank(&union), base);
    }

    #[test]
    fn unisolvence_condition() {
        let mut rng = SplitMix64::new(77);
        for _ in 0..10 {
            let ents = TetEntities::from_verts(random_shape_regular_tet(&mut rng));
            for k in 0..=2 {
                let el = sigma_tn_local(k, &ents).unwrap();
                let cond = el.vandermonde_condition(&ents.geom);
                assert!(cond < 1e8, "sigma k={k} condition {cond:.3e}");
            }
        }
    }
}
