//! Nédélec edge elements of first (`l = k-1`) and second (`l = k`) kind,
//! their row-wise matrix lift, and the local post-processing space.

use super::*;
use crate::poly::{dim_p2, dim_p3, homogeneous_monomials, monomial_basis};
use crate::polyquad::{basis_scalar, integrate_face, integrate_tet, quadrature};

fn dim_pk_2d(d: isize) -> usize {
    if d < 0 {
        0
    } else {
        dim_p2(d as usize)
    }
}

fn dim_pk_3d(d: isize) -> usize {
    if d < 0 {
        0
    } else {
        dim_p3(d as usize)
    }
}

/// Shape-space dimension of `x cross P_{k-1}(R^3) + grad P_{l+1}`.
pub fn nedelec_dim(k: usize, l: usize) -> usize {
    if l + 1 == k {
        k * (k + 2) * (k + 3) / 2
    } else {
        (k + 1) * (k + 2) * (k + 3) / 2
    }
}

fn face_dof_count(k: usize, l: usize) -> usize {
    (dim_p2(k - 1) - 1) + dim_pk_2d(l as isize - 2)
}

fn cell_dof_count(k: usize, l: usize) -> usize {
    let curl_dim = if k >= 2 {
        3 * dim_p3(k - 2) - (dim_p3(k - 1) - 1)
    } else {
        0
    };
    curl_dim + dim_pk_3d(l as isize - 3)
}

/// Orthonormalizes tangential face fields in the face L2 inner product.
fn orthonormalize_face_fields(
    what: &str,
    frame: &FaceFrame,
    spanning: Vec<FaceVecPoly>,
    expected: usize,
) -> Result<Vec<FaceVecPoly>, ElementError> {
    let n = spanning.len();
    if n == 0 {
        if expected != 0 {
            return Err(ElementError::SpanRankMismatch {
                what: what.into(),
                got: 0,
                expected,
            });
        }
        return Ok(Vec::new());
    }
    let deg = spanning.iter().map(|f| f.degree()).max().unwrap();
    let rule = quadrature(Domain::Tri, 2 * deg).unwrap();
    let mut g = DMatrix::zeros(n, n);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let l = [p[0], p[1], p[2]];
        let vals: Vec<V3> = spanning.iter().map(|f| f.eval(&l)).collect();
        for i in 0..n {
            for j in i..n {
                g[(i, j)] += 2.0 * w * vals[i].dot(&vals[j]);
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    let (vals, vecs) = sym_eig_sorted(g);
    let vmax = vals[0].max(0.0);
    let mut out = Vec::new();
    for (idx, &lam) in vals.iter().enumerate() {
        if lam > 1e-12 * vmax {
            let scale = 1.0 / lam.sqrt();
            let mut f = FaceVecPoly {
                exps: Vec::new(),
                coeffs: Vec::new(),
            };
            for s in 0..n {
                let c = vecs[(s, idx)] * scale;
                if c != 0.0 {
                    f.add_scaled(&spanning[s], c);
                }
            }
            out.push(f);
        }
    }
    if out.len() != expected {
        return Err(ElementError::SpanRankMismatch {
            what: format!("{what} on face ({:?})", frame.barycenter),
            got: out.len(),
            expected,
        });
    }
    Ok(out)
}

/// Surface curl `n x grad m` of a face barycentric monomial.
fn face_curl(frame: &FaceFrame, exp: &[usize; 3]) -> FaceVecPoly {
    let grads = frame.grad_lambda();
    let mut exps = Vec::new();
    let mut coeffs = Vec::new();
    for a in 0..3 {
        if exp[a] == 0 {
            continue;
        }
        let mut e = *exp;
        e[a] -= 1;
        exps.push(e);
        coeffs.push(frame.normal.cross(&grads[a]) * exp[a] as f64);
    }
    FaceVecPoly { exps, coeffs }
}

/// `(x - x_F) m` as a face vector polynomial.
fn face_position_scaled(frame: &FaceFrame, exp: &[usize; 3]) -> FaceVecPoly {
    let mut exps = Vec::new();
    let mut coeffs = Vec::new();
    for a in 0..3 {
        let mut e = *exp;
        e[a] += 1;
        exps.push(e);
        coeffs.push(frame.verts[a] - frame.barycenter);
    }
    FaceVecPoly { exps, coeffs }
}

pub fn nedelec_local(k: usize, l: usize, ents: &TetEntities) -> Result<LocalElement, ElementError> {
    if k < 1 || k > 3 {
        return Err(ElementError::UnsupportedOrder {
            family: "Nedelec".into(),
            detail: format!("degree {k} outside 1..=3"),
        });
    }
    if l + 1 != k && l != k {
        return Err(ElementError::UnsupportedOrder {
            family: "Nedelec".into(),
            detail: format!("gradient order l={l} must be k-1 or k (k={k})"),
        });
    }
    let family = Family::Nedelec { k, l };
    let geom = &ents.geom;

    // Shape space x cross P_{k-1}(R^3) + grad P_{l+1}, reduced to a basis.
    let mut spanning = Vec::new();
    for m in monomial_basis(l + 1).into_iter().skip(1) {
        spanning.push(Shape::Vector(VecPoly3([m.diff(0), m.diff(1), m.diff(2)])));
    }
    for m in monomial_basis(k - 1) {
        for a in 0..3 {
            let mut e = V3::zeros();
            e[a] = 1.0;
            spanning.push(Shape::Vector(VecPoly3::from_scaled(&m, &e).coord_cross()));
        }
    }
    let gram = |a: &Shape, b: &Shape| {
        let c = geom.barycenter;
        integrate_tet(geom, a.degree() + b.degree(), |x| {
            let xi = x - c;
            a.eval(&xi).pair(&b.eval(&xi))
        }) / geom.volume
    };
    let shapes = orthonormalize_shapes("nedelec shape space", spanning, gram, Some(nedelec_dim(k, l)))?;

    let mut dofs = Vec::new();
    // Edge moments with the global lower-to-higher tangent.
    let edge_basis = basis_scalar(l, Domain::Edge);
    for ke in 0..6 {
        let (a, b) = ents.edges[ke];
        for (mi, e) in edge_basis.exponents.iter().enumerate() {
            dofs.push(Dof {
                entity: Entity::Edge(ke),
                index_on_entity: mi,
                spec: DofSpec::EdgeMoment {
                    a,
                    b,
                    q: vec![([e[0], e[1]], 1.0)],
                },
            });
        }
    }
    // Face moments against curl_F P_{k-1}(F) + (x - x_F) P_{l-2}(F).
    let nf = face_dof_count(k, l);
    if nf > 0 {
        for kf in 0..4 {
            let frame = &ents.faces[kf];
            let mut spanning = Vec::new();
            for e in &basis_scalar(k - 1, Domain::Tri).exponents {
                spanning.push(face_curl(frame, &[e[0], e[1], e[2]]));
            }
            if l >= 2 {
                for e in &basis_scalar(l - 2, Domain::Tri).exponents {
                    spanning.push(face_position_scaled(frame, &[e[0], e[1], e[2]]));
                }
            }
            let fields = orthonormalize_face_fields("nedelec face moments", frame, spanning, nf)?;
            for (i, q) in fields.into_iter().enumerate() {
                dofs.push(Dof {
                    entity: Entity::Face(kf),
                    index_on_entity: i,
                    spec: DofSpec::FaceVecMoment {
                        frame: frame.clone(),
                        q,
                    },
                });
            }
        }
    }
    // Interior moments against curl P_{k-2}(R^3) + x P_{l-3}.
    let nc = cell_dof_count(k, l);
    if nc > 0 {
        let mut spanning = Vec::new();
        if k >= 2 {
            for m in monomial_basis(k - 2) {
                for a in 0..3 {
                    let mut e = V3::zeros();
                    e[a] = 1.0;
                    spanning.push(Shape::Vector(VecPoly3::from_scaled(&m, &e).curl()));
                }
            }
        }
        if l >= 3 {
            for m in monomial_basis(l - 3) {
                spanning.push(Shape::Vector(VecPoly3([
                    m.mul_coord(0),
                    m.mul_coord(1),
                    m.mul_coord(2),
                ])));
            }
        }
        let tests = orthonormalize_shapes("nedelec interior moments", spanning, gram, Some(nc))?;
        for (i, test) in tests.into_iter().enumerate() {
            dofs.push(Dof {
                entity: Entity::Cell,
                index_on_entity: i,
                spec: DofSpec::CellMoment { test },
            });
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

/// Matrix-valued Nédélec element: each row is a second-kind field.
pub fn nedelec_matrix_local(k: usize, ents: &TetEntities) -> Result<LocalElement, ElementError> {
    let el = nedelec_local(k, k, ents)?;
    Ok(lift_rows(Family::NedelecMatrix { k }, el))
}

/// Local post-processing space `P_k(R^3) + x cross P_k(R^3)` with an
/// L2-orthonormal internal basis (its DoFs are moments against itself).
pub fn post_curl_local(k: usize, ents: &TetEntities) -> Result<LocalElement, ElementError> {
    if k < 1 || k > 3 {
        return Err(ElementError::UnsupportedOrder {
            family: "PostCurl".into(),
            detail: format!("degree {k} outside 1..=3"),
        });
    }
    let family = Family::PostCurl { k };
    let geom = &ents.geom;
    let mut spanning = Vec::new();
    for m in monomial_basis(k) {
        for a in 0..3 {
            let mut e = V3::zeros();
            e[a] = 1.0;
            spanning.push(Shape::Vector(VecPoly3::from_scaled(&m, &e)));
        }
    }
    for m in homogeneous_monomials(k) {
        for a in 0..3 {
            let mut e = V3::zeros();
            e[a] = 1.0;
            spanning.push(Shape::Vector(VecPoly3::from_scaled(&m, &e).coord_cross()));
        }
    }
    let expected = 3 * dim_p3(k) + 3 * dim_p2(k) - dim_p2(k - 1);
    let gram = |a: &Shape, b: &Shape| {
        let c = geom.barycenter;
        integrate_tet(geom, a.degree() + b.degree(), |x| {
            let xi = x - c;
            a.eval(&xi).pair(&b.eval(&xi))
        }) / geom.volume
    };
    let shapes = orthonormalize_shapes("post-processing space", spanning, gram, Some(expected))?;
    let dofs: Vec<Dof> = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| Dof {
            entity: Entity::Cell,
            index_on_entity: i,
            spec: DofSpec::CellMoment { test: s.clone() },
        })
        .collect();
    // The basis is L2-orthonormal, so it is self-dual for these moments and
    // the Vandermonde inversion can be skipped.
    let nodal = shapes.clone();
    Ok(LocalElement {
        family,
        center: geom.barycenter,
        dofs,
        shapes,
        nodal,
    })
}

/// Face L2 norm of the tangential trace `n x v x n` of a local shape;
/// used to verify trace locality.
pub fn tangential_trace_norm(shape: &Shape, center: &V3, frame: &FaceFrame) -> f64 {
    let n = frame.normal;
    let sq = integrate_face(frame, 2 * shape.degree().max(1), |x| {
        let v = shape.eval(&(x - center)).as_vector();
        let t = n.cross(&v).cross(&n);
        t.norm_squared()
    });
    sq.sqrt()
}
