//! Tangential face multipliers: `P_{k-1}(F; R^3)` fields with zero normal
//! component, expressed in the global face frame.

use super::*;
use crate::polyquad::basis_scalar;

/// Face-attached multiplier basis; unlike the tet families it carries its
/// own fields rather than a nodal construction.
#[derive(Clone, Debug)]
pub struct FaceMultiplier {
    pub k: usize,
    pub frame: FaceFrame,
    pub fields: Vec<FaceVecPoly>,
    pub dofs: Vec<Dof>,
}

/// Basis fields `m(lambda) t_s` in canonical order (monomial-major,
/// tangent-minor). Identical for the two tets sharing the face.
pub fn multiplier_fields(k: usize, frame: &FaceFrame) -> Vec<FaceVecPoly> {
    let basis = basis_scalar(k - 1, Domain::Tri);
    let mut out = Vec::with_capacity(2 * basis.dim());
    for e in &basis.exponents {
        for t in [frame.t1, frame.t2] {
            out.push(FaceVecPoly {
                exps: vec![[e[0], e[1], e[2]]],
                coeffs: vec![t],
            });
        }
    }
    out
}

pub fn lambda_face_local(k: usize, frame: &FaceFrame) -> Result<FaceMultiplier, ElementError> {
    if k < 1 || k > 3 {
        return Err(ElementError::UnsupportedOrder {
            family: "Multiplier".into(),
            detail: format!("method degree {k} outside 1..=3"),
        });
    }
    let fields = multiplier_fields(k, frame);
    let dofs = fields
        .iter()
        .enumerate()
        .map(|(i, q)| Dof {
            entity: Entity::Face(0),
            index_on_entity: i,
            spec: DofSpec::FaceVecMoment {
                frame: frame.clone(),
                q: q.clone(),
            },
        })
        .collect();
    Ok(FaceMultiplier {
        k,
        frame: frame.clone(),
        fields,
        dofs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TetMesh;

    #[test]
    fn counts_and_normal_component() {
        let mesh = TetMesh::build_cube_mesh(1).unwrap();
        let frame = mesh.face_frame(7);
        for (k, expect) in [(1usize, 2usize), (2, 6), (3, 12)] {
            let mult = lambda_face_local(k, &frame).unwrap();
            assert_eq!(mult.fields.len(), expect);
            for f in &mult.fields {
                for l in [[1.0, 0.0, 0.0], [0.3, 0.3, 0.4], [0.1, 0.6, 0.3]] {
                    let v = f.eval(&l);
                    assert!(v.dot(&frame.normal).abs() < 1e-14);
                }
            }
        }
    }
}
