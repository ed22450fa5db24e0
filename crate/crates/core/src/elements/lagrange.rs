//! Standard nodal Lagrange elements on lattice points, plus the vector lift.

use super::*;
use crate::poly::monomial_basis;
use crate::polyquad::basis_scalar;

pub fn lagrange_local(m: usize, ents: &TetEntities) -> Result<LocalElement, ElementError> {
    if m < 1 || m > 4 {
        return Err(ElementError::UnsupportedOrder {
            family: "Lagrange".into(),
            detail: format!("degree {m} outside 1..=4"),
        });
    }
    let family = Family::Lagrange { m };
    let geom = &ents.geom;
    let shapes: Vec<Shape> = monomial_basis(m).into_iter().map(Shape::Scalar).collect();

    let mut dofs = Vec::new();
    for v in 0..4 {
        dofs.push(Dof {
            entity: Entity::Vertex(v),
            index_on_entity: 0,
            spec: DofSpec::PointEval {
                point: geom.verts[v],
            },
        });
    }
    // Edge lattice points run from the lower-id to the higher-id vertex.
    for ke in 0..6 {
        let (a, b) = ents.edges[ke];
        for i in 1..m {
            dofs.push(Dof {
                entity: Entity::Edge(ke),
                index_on_entity: i - 1,
                spec: DofSpec::PointEval {
                    point: a + (b - a) * (i as f64 / m as f64),
                },
            });
        }
    }
    // Face interior lattice in the canonical order of sorted-vertex
    // barycentric exponents.
    if m >= 3 {
        for kf in 0..4 {
            let fr = &ents.faces[kf];
            let mut idx = 0;
            for e in &basis_scalar(m, Domain::Tri).exponents {
                if e[0] == 0 || e[1] == 0 || e[2] == 0 {
                    continue;
                }
                let l = [
                    e[0] as f64 / m as f64,
                    e[1] as f64 / m as f64,
                    e[2] as f64 / m as f64,
                ];
                dofs.push(Dof {
                    entity: Entity::Face(kf),
                    index_on_entity: idx,
                    spec: DofSpec::PointEval {
                        point: fr.point_from_lambda(&l),
                    },
                });
                idx += 1;
            }
        }
    }
    if m >= 4 {
        let mut idx = 0;
        for e in &basis_scalar(m, Domain::Tet).exponents {
            if e.iter().any(|&x| x == 0) {
                continue;
            }
            let l = [
                e[0] as f64 / m as f64,
                e[1] as f64 / m as f64,
                e[2] as f64 / m as f64,
                e[3] as f64 / m as f64,
            ];
            dofs.push(Dof {
                entity: Entity::Cell,
                index_on_entity: idx,
                spec: DofSpec::PointEval {
                    point: geom.point_from_lambda(&l),
                },
            });
            idx += 1;
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

pub fn lagrange_vector_local(m: usize, ents: &TetEntities) -> Result<LocalElement, ElementError> {
    let el = lagrange_local(m, ents)?;
    // Reuse the row lift with scalar DoFs viewed as row moments.
    let mut dofs = Vec::with_capacity(3 * el.dofs.len());
    for d in &el.dofs {
        for r in 0..3 {
            dofs.push(Dof {
                entity: d.entity,
                index_on_entity: 3 * d.index_on_entity + r,
                spec: DofSpec::RowLift {
                    row: r,
                    inner: Box::new(d.spec.clone()),
                },
            });
        }
    }
    // Vector shapes: scalar basis times unit directions.
    let mut shapes = Vec::new();
    let mut nodal = Vec::new();
    for i in 0..el.shapes.len() {
        for r in 0..3 {
            let mut e = V3::zeros();
            e[r] = 1.0;
            if let (Shape::Scalar(s), Shape::Scalar(n)) = (&el.shapes[i], &el.nodal[i]) {
                shapes.push(Shape::Vector(VecPoly3::from_scaled(s, &e)));
                nodal.push(Shape::Vector(VecPoly3::from_scaled(n, &e)));
            }
        }
    }
    Ok(LocalElement {
        family: Family::LagrangeVector { m },
        center: el.center,
        dofs,
        shapes,
        nodal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ref_ents() -> TetEntities {
        TetEntities::from_verts([
            V3::new(0.0, 0.0, 0.0),
            V3::new(1.0, 0.0, 0.0),
            V3::new(0.0, 1.0, 0.0),
            V3::new(0.0, 0.0, 1.0),
        ])
    }

    #[test]
    fn dof_counts() {
        let ents = ref_ents();
        assert_eq!(lagrange_local(1, &ents).unwrap().dim(), 4);
        assert_eq!(lagrange_local(2, &ents).unwrap().dim(), 10);
        assert_eq!(lagrange_local(3, &ents).unwrap().dim(), 20);
        assert_eq!(lagrange_local(4, &ents).unwrap().dim(), 35);
    }

    #[test]
    fn reproduces_lambda_product() {
        let ents = ref_ents();
        let geom = &ents.geom;
        let el = lagrange_local(2, &ents).unwrap();
        // lambda_0 lambda_1 on the reference tet is (1-x-y-z) x.
        let mut f = |p: &V3| {
            let l = geom.lambda(p);
            Value::Scalar(l[0] * l[1])
        };
        let mut combo = Poly3::zero(0);
        for (d, nod) in el.dofs.iter().zip(&el.nodal) {
            let c = d.apply(geom, 4, &mut f);
            if let Shape::Scalar(s) = nod {
                combo.add_scaled(s, c);
            }
        }
        for lam in [[0.1, 0.2, 0.3, 0.4], [0.7, 0.1, 0.1, 0.1]] {
            let x = geom.point_from_lambda(&lam);
            let got = combo.eval(&(x - geom.barycenter));
            assert!((got - lam[0] * lam[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn nodal_kronecker_property() {
        let ents = ref_ents();
        for m in 1..=3 {
            let el = lagrange_local(m, &ents).unwrap();
            for (i, d) in el.dofs.iter().enumerate() {
                for (j, n) in el.nodal.iter().enumerate() {
                    let v = d.apply_shape(&ents.geom, &el.center, n);
                    let expect = (i == j) as i32 as f64;
                    assert!((v - expect).abs() < 1e-9, "m={m} dof {i} nodal {j}: {v}");
                }
            }
        }
    }

    #[test]
    fn vector_lift() {
        let ents = ref_ents();
        let el = lagrange_vector_local(2, &ents).unwrap();
        assert_eq!(el.dim(), 30);
    }
}
