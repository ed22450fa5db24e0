//! Element-local post-processing: recovers a superconvergent velocity in
//! `P_k + x cross P_k` from the stress and the lowest-order edge means of
//! the discrete velocity.

use super::*;
use crate::assembly::{FESpace, FieldCoefficients};
use crate::elements::{Dof, DofSpec, Entity, Family, Shape, TetEntities};
use crate::poly::{barycentric_polys, monomial_basis, VecPoly3};
use crate::polyquad::{basis_scalar, integrate_tet, Domain};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Test matrices spanning `grad curl P_{k+1}(T; R^3)`, L2-orthonormalized.
fn grad_curl_tests(k: usize, geom: &crate::mesh::TetGeometry) -> Vec<Shape> {
    let mut spanning = Vec::new();
    for m in monomial_basis(k + 1) {
        for a in 0..3 {
            let mut e = crate::mesh::V3::zeros();
            e[a] = 1.0;
            let v = VecPoly3::from_scaled(&m, &e);
            spanning.push(Shape::Matrix(v.curl().grad()));
        }
    }
    let expected = {
        let d3 = crate::poly::dim_p3(k + 1);
        let d4 = crate::poly::dim_p3(k + 2);
        (3 * d3 - (d4 - 1)) - 3
    };
    let gram = |a: &Shape, b: &Shape| {
        let c = geom.barycenter;
        integrate_tet(geom, a.degree() + b.degree(), |x| {
            let xi = x - c;
            a.eval(&xi).pair(&b.eval(&xi))
        }) / geom.volume
    };
    crate::elements::orthonormalize_shapes("grad curl tests", spanning, gram, Some(expected))
        .expect("grad curl spanning set has the predicted rank")
}

/// Gradients of the vertex-vanishing polynomials of degree `k+1` (the mixed
/// barycentric monomials of exact degree `k+1`).
fn grad_pbubble(k: usize, geom: &crate::mesh::TetGeometry) -> Vec<VecPoly3> {
    let lam = barycentric_polys(geom);
    let basis = basis_scalar(k + 1, Domain::Tet);
    let mut out = Vec::new();
    for e in &basis.exponents {
        if e.iter().any(|&a| a == k + 1) {
            continue; // pure vertex powers do not vanish at vertices
        }
        let mut p = crate::poly::Poly3::constant(1.0);
        for i in 0..4 {
            for _ in 0..e[i] {
                p = p.mul(&lam[i]);
            }
        }
        out.push(VecPoly3([p.diff(0), p.diff(1), p.diff(2)]));
    }
    out
}

/// Builds the post-processed field from a solved state.
pub fn postprocess(
    sol: &QuadCurlSolution,
    k: usize,
) -> Result<FieldCoefficients, SolveError> {
    let mesh = sol.mesh.clone();
    let star_space = FESpace::build(Family::PostCurl { k }, mesh.clone(), false)?;
    let nt = mesh.tets.len();

    let locals: Vec<Result<Vec<f64>, SolveError>> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let ents = TetEntities::from_mesh(&mesh, t);
            let geom = &ents.geom;
            let el = &star_space.elements[t];
            let n = el.shapes.len();
            let center = el.center;

            let u_h = sol.u.local_vec(t);
            let sigma_h = sol.sigma.local_mat(t);
            let sigma_center = sol.sigma.space.elements[t].center;

            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
            let mut rhs: Vec<f64> = Vec::with_capacity(n);

            // (4.9)-type rows: mean tangential component per edge.
            for ke in 0..6 {
                let (a, b) = ents.edges[ke];
                let dof = Dof {
                    entity: Entity::Edge(ke),
                    index_on_entity: 0,
                    spec: DofSpec::EdgeMoment {
                        a,
                        b,
                        q: vec![([0, 0], 1.0)],
                    },
                };
                rows.push(
                    el.shapes
                        .iter()
                        .map(|s| dof.apply_shape(geom, &center, s))
                        .collect(),
                );
                rhs.push(dof.apply_shape(geom, &center, &Shape::Vector(u_h.clone())));
            }
            // Stress rows: grad curl moments against grad curl P_{k+1}.
            // All fields are evaluated once per quadrature node.
            {
                let tests = grad_curl_tests(k, geom);
                let rule = crate::polyquad::quadrature(Domain::Tet, 2 * (k + 1)).unwrap();
                let gcs: Vec<crate::poly::MatPoly3> = el
                    .shapes
                    .iter()
                    .map(|s| match s {
                        Shape::Vector(v) => v.curl().grad(),
                        _ => unreachable!(),
                    })
                    .collect();
                let mut rows_block = vec![vec![0.0; n]; tests.len()];
                let mut rhs_block = vec![0.0; tests.len()];
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    let x = geom.point_from_lambda(p);
                    let xi = x - center;
                    let scale = 6.0 * w; // volume normalization cancels
                    let qvals: Vec<_> = tests.iter().map(|q| q.eval(&xi).as_matrix()).collect();
                    let gvals: Vec<_> = gcs.iter().map(|g| g.eval(&xi)).collect();
                    let sval = sigma_h.eval(&(x - sigma_center));
                    for (r, qv) in qvals.iter().enumerate() {
                        for (j, gv) in gvals.iter().enumerate() {
                            rows_block[r][j] += scale * gv.dot(qv);
                        }
                        rhs_block[r] += scale * sval.dot(qv);
                    }
                }
                for (r, row) in rows_block.into_iter().enumerate() {
                    rows.push(row);
                    rhs.push(rhs_block[r]);
                }
            }
            // Velocity rows: moments against grad of vertex-vanishing
            // polynomials.
            {
                let gbs = grad_pbubble(k, geom);
                let rule = crate::polyquad::quadrature(Domain::Tet, 2 * (k + 2)).unwrap();
                let shs: Vec<&VecPoly3> = el
                    .shapes
                    .iter()
                    .map(|s| match s {
                        Shape::Vector(v) => v,
                        _ => unreachable!(),
                    })
                    .collect();
                let mut rows_block = vec![vec![0.0; n]; gbs.len()];
                let mut rhs_block = vec![0.0; gbs.len()];
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    let x = geom.point_from_lambda(p);
                    let xi = x - center;
                    let scale = 6.0 * w;
                    let gvals: Vec<_> = gbs.iter().map(|g| g.eval(&xi)).collect();
                    let svals: Vec<_> = shs.iter().map(|s| s.eval(&xi)).collect();
                    let uval = u_h.eval(&xi);
                    for (r, gv) in gvals.iter().enumerate() {
                        for (j, sv) in svals.iter().enumerate() {
                            rows_block[r][j] += scale * sv.dot(gv);
                        }
                        rhs_block[r] += scale * uval.dot(gv);
                    }
                }
                for (r, row) in rows_block.into_iter().enumerate() {
                    rows.push(row);
                    rhs.push(rhs_block[r]);
                }
            }

            if rows.len() != n {
                return Err(SolveError::SingularLocal { tet: t });
            }
            let a = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            let bvec = DVector::from_vec(rhs.clone());
            let lu = a.clone().lu();
            let x = lu.solve(&bvec).ok_or(SolveError::SingularLocal { tet: t })?;
            let resid = (&a * &x - &bvec).amax();
            if !(resid <= 1e-8 * bvec.amax().max(1.0)) {
                return Err(SolveError::SingularLocal { tet: t });
            }
            // Solution in the shape basis; convert to nodal coefficients by
            // applying the element's own DoFs.
            let mut star = VecPoly3::zero(0);
            for (j, s) in el.shapes.iter().enumerate() {
                if let Shape::Vector(v) = s {
                    star.add_scaled(v, x[j]);
                }
            }
            let shape = Shape::Vector(star);
            Ok(el
                .dofs
                .iter()
                .map(|d| d.apply_shape(geom, &center, &shape))
                .collect())
        })
        .collect();

    let mut coeffs = vec![0.0; star_space.dim()];
    for (t, loc) in locals.into_iter().enumerate() {
        let loc = loc?;
        for (i, v) in loc.into_iter().enumerate() {
            let g = star_space.cell_dofs[t][i];
            coeffs[star_space.free_of_full[g].unwrap()] = v;
        }
    }
    Ok(FieldCoefficients::from_coeffs(star_space, coeffs))
}
