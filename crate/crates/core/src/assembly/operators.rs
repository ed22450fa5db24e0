//! Assembly of the bilinear forms and inclusion matrices.
//!
//! The distributional form pairs element terms with interior-face jump
//! terms. Jumps follow the fixed face normal `n_F`: the tet whose outward
//! normal equals `+n_F` contributes with `+`, the other with `-`, which is
//! exactly the stored `tet_face_sign`. Assembly is element-parallel with
//! per-tet triplet buffers flattened in element order, so results are
//! bit-stable for any thread count.

use super::*;
use crate::polyquad::{quadrature, Domain};

fn check_meshes(a: &FESpace, b: &FESpace) -> Result<(), AssemblyError> {
    if a.same_mesh(b) {
        Ok(())
    } else {
        Err(AssemblyError::MeshMismatch)
    }
}

fn max_degree(space: &FESpace) -> usize {
    space
        .elements
        .first()
        .map(|el| el.nodal.iter().map(|s| s.degree()).max().unwrap_or(0))
        .unwrap_or(0)
}

fn collect_triplets<F>(nt: usize, per_tet: F) -> Vec<(usize, usize, f64)>
where
    F: Fn(usize) -> Vec<(usize, usize, f64)> + Sync + Send,
{
    let buffers: Vec<Vec<(usize, usize, f64)>> = (0..nt).into_par_iter().map(per_tet).collect();
    buffers.into_iter().flatten().collect()
}

/// L2 mass matrix of a space (face L2 for multipliers).
pub fn assemble_mass(space: &Arc<FESpace>) -> SparseOperator {
    if matches!(space.family, Family::Multiplier { .. }) {
        return assemble_multiplier_mass(space);
    }
    let mesh = space.mesh.clone();
    let deg = 2 * max_degree(space);
    let trips = collect_triplets(mesh.tets.len(), |t| {
        let geom = mesh.tet_geometry(t);
        let el = &space.elements[t];
        let rule = quadrature(Domain::Tet, deg.min(Domain::Tet.max_degree())).unwrap();
        let n = el.nodal.len();
        let mut local = vec![0.0; n * n];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let x = geom.point_from_lambda(p);
            let xi = x - el.center;
            let vals: Vec<Value> = el.nodal.iter().map(|s| s.eval(&xi)).collect();
            let scale = 6.0 * geom.volume * w;
            for a in 0..n {
                for b in a..n {
                    local[a * n + b] += scale * vals[a].pair(&vals[b]);
                }
            }
        }
        let mut out = Vec::new();
        for a in 0..n {
            let ga = space.free_of_full[space.cell_dofs[t][a]];
            for b in a..n {
                let gb = space.free_of_full[space.cell_dofs[t][b]];
                if let (Some(ra), Some(rb)) = (ga, gb) {
                    let v = local[a * n + b];
                    out.push((ra, rb, v));
                    if ra != rb {
                        out.push((rb, ra, v));
                    }
                }
            }
        }
        out
    });
    SparseMatrix::from_triplets(space.dim(), space.dim(), trips)
}

fn assemble_multiplier_mass(space: &Arc<FESpace>) -> SparseOperator {
    let mesh = &space.mesh;
    let mut trips = Vec::new();
    let deg = match space.family {
        Family::Multiplier { k } => 2 * (k - 1),
        _ => unreachable!(),
    };
    let rule = quadrature(Domain::Tri, deg.min(Domain::Tri.max_degree())).unwrap();
    for f in 0..mesh.faces.len() {
        if mesh.face_boundary[f] {
            continue;
        }
        let frame = mesh.face_frame(f);
        let fields = &space.face_fields[f];
        let base = space.face_dof_base(f);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let l = [p[0], p[1], p[2]];
            let vals: Vec<V3> = fields.iter().map(|q| q.eval(&l)).collect();
            let scale = 2.0 * frame.area * w;
            for a in 0..fields.len() {
                let ra = space.free_of_full[base + a].unwrap();
                for b in 0..fields.len() {
                    let rb = space.free_of_full[base + b].unwrap();
                    trips.push((ra, rb, scale * vals[a].dot(&vals[b])));
                }
            }
        }
    }
    SparseMatrix::from_triplets(space.dim(), space.dim(), trips)
}

/// Curl-curl stiffness `(curl u, curl v)` on a Nédélec space.
pub fn assemble_curlcurl(space: &Arc<FESpace>) -> SparseOperator {
    let mesh = space.mesh.clone();
    let deg = 2 * max_degree(space).saturating_sub(1).max(0);
    let trips = collect_triplets(mesh.tets.len(), |t| {
        let geom = mesh.tet_geometry(t);
        let el = &space.elements[t];
        let curls: Vec<VecPoly3> = el
            .nodal
            .iter()
            .map(|s| match s {
                Shape::Vector(v) => v.curl(),
                _ => panic!("curl-curl needs a vector space"),
            })
            .collect();
        let rule = quadrature(Domain::Tet, deg.min(Domain::Tet.max_degree())).unwrap();
        let n = curls.len();
        let mut local = vec![0.0; n * n];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let xi = geom.point_from_lambda(p) - el.center;
            let vals: Vec<V3> = curls.iter().map(|c| c.eval(&xi)).collect();
            let scale = 6.0 * geom.volume * w;
            for a in 0..n {
                for b in a..n {
                    local[a * n + b] += scale * vals[a].dot(&vals[b]);
                }
            }
        }
        let mut out = Vec::new();
        for a in 0..n {
            let ga = space.free_of_full[space.cell_dofs[t][a]];
            for b in a..n {
                let gb = space.free_of_full[space.cell_dofs[t][b]];
                if let (Some(ra), Some(rb)) = (ga, gb) {
                    out.push((ra, rb, local[a * n + b]));
                    if ra != rb {
                        out.push((rb, ra, local[a * n + b]));
                    }
                }
            }
        }
        out
    });
    SparseMatrix::from_triplets(space.dim(), space.dim(), trips)
}

/// Gradient coupling `G[v, psi] = (grad psi, v)`; rows test the Nédélec
/// space, columns the Lagrange space.
pub fn assemble_grad_coupling(
    q_space: &Arc<FESpace>,
    v_space: &Arc<FESpace>,
) -> Result<SparseOperator, AssemblyError> {
    check_meshes(q_space, v_space)?;
    let mesh = v_space.mesh.clone();
    let deg = max_degree(q_space).saturating_sub(1) + max_degree(v_space);
    let qs = q_space.clone();
    let vs = v_space.clone();
    let trips = collect_triplets(mesh.tets.len(), |t| {
        let geom = mesh.tet_geometry(t);
        let qe = &qs.elements[t];
        let ve = &vs.elements[t];
        let grads: Vec<VecPoly3> = qe
            .nodal
            .iter()
            .map(|s| match s {
                Shape::Scalar(p) => VecPoly3([p.diff(0), p.diff(1), p.diff(2)]),
                _ => panic!("gradient coupling needs a scalar space"),
            })
            .collect();
        let vvecs: Vec<&VecPoly3> = ve
            .nodal
            .iter()
            .map(|s| match s {
                Shape::Vector(v) => v,
                _ => panic!("gradient coupling tests a vector space"),
            })
            .collect();
        let rule = quadrature(Domain::Tet, deg.min(Domain::Tet.max_degree())).unwrap();
        let mut local = vec![0.0; vvecs.len() * grads.len()];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let xi = geom.point_from_lambda(p) - ve.center;
            let gv: Vec<V3> = grads.iter().map(|g| g.eval(&xi)).collect();
            let vv: Vec<V3> = vvecs.iter().map(|v| v.eval(&xi)).collect();
            let scale = 6.0 * geom.volume * w;
            for a in 0..vv.len() {
                for b in 0..gv.len() {
                    local[a * gv.len() + b] += scale * vv[a].dot(&gv[b]);
                }
            }
        }
        let mut out = Vec::new();
        for a in 0..vvecs.len() {
            if let Some(ra) = vs.free_of_full[vs.cell_dofs[t][a]] {
                for b in 0..grads.len() {
                    if let Some(cb) = qs.free_of_full[qs.cell_dofs[t][b]] {
                        out.push((ra, cb, local[a * grads.len() + b]));
                    }
                }
            }
        }
        out
    });
    Ok(SparseMatrix::from_triplets(
        v_space.dim(),
        q_space.dim(),
        trips,
    ))
}

/// Scalar stiffness `(grad psi_i, grad psi_j)` on a Lagrange space.
pub fn assemble_grad_stiffness(q_space: &Arc<FESpace>) -> SparseOperator {
    let mesh = q_space.mesh.clone();
    let deg = 2 * max_degree(q_space).saturating_sub(1);
    let qs = q_space.clone();
    let trips = collect_triplets(mesh.tets.len(), |t| {
        let geom = mesh.tet_geometry(t);
        let el = &qs.elements[t];
        let grads: Vec<VecPoly3> = el
            .nodal
            .iter()
            .map(|s| match s {
                Shape::Scalar(p) => VecPoly3([p.diff(0), p.diff(1), p.diff(2)]),
                _ => panic!("stiffness needs a scalar space"),
            })
            .collect();
        let rule = quadrature(Domain::Tet, deg.min(Domain::Tet.max_degree())).unwrap();
        let n = grads.len();
        let mut local = vec![0.0; n * n];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let xi = geom.point_from_lambda(p) - el.center;
            let gv: Vec<V3> = grads.iter().map(|g| g.eval(&xi)).collect();
            let scale = 6.0 * geom.volume * w;
            for a in 0..n {
                for b in a..n {
                    local[a * n + b] += scale * gv[a].dot(&gv[b]);
                }
            }
        }
        let mut out = Vec::new();
        for a in 0..n {
            if let Some(ra) = qs.free_of_full[qs.cell_dofs[t][a]] {
                for b in a..n {
                    if let Some(rb) = qs.free_of_full[qs.cell_dofs[t][b]] {
                        out.push((ra, rb, local[a * n + b]));
                        if ra != rb {
                            out.push((rb, ra, local[a * n + b]));
                        }
                    }
                }
            }
        }
        out
    });
    SparseMatrix::from_triplets(q_space.dim(), q_space.dim(), trips)
}

/// Distributional curl-div form
/// `B[v, tau] = sum_T (div tau, curl v)_T
///            - sum_{interior F} (jump(n^T tau n), n_F . curl v)_F`.
///
/// Boundary faces are skipped: `n_F . curl v` is the surface rot of the
/// tangential trace, which vanishes for the constrained test space.
pub fn assemble_b(
    sigma: &Arc<FESpace>,
    v_space: &Arc<FESpace>,
) -> Result<SparseOperator, AssemblyError> {
    check_meshes(sigma, v_space)?;
    let mesh = v_space.mesh.clone();
    let dsig = max_degree(sigma);
    let dv = max_degree(v_space);
    let ss = sigma.clone();
    let vs = v_space.clone();
    let trips = collect_triplets(mesh.tets.len(), |t| {
        let geom = mesh.tet_geometry(t);
        let se = &ss.elements[t];
        let ve = &vs.elements[t];
        let divs: Vec<VecPoly3> = se
            .nodal
            .iter()
            .map(|s| match s {
                Shape::Matrix(m) => m.row_div(),
                _ => panic!("curl-div form needs a matrix trial space"),
            })
            .collect();
        let curls: Vec<VecPoly3> = ve
            .nodal
            .iter()
            .map(|s| match s {
                Shape::Vector(v) => v.curl(),
                _ => panic!("curl-div form tests a vector space"),
            })
            .collect();
        let ns = divs.len();
        let nv = curls.len();
        let mut local = vec![0.0; nv * ns];
        // volume term
        if dsig >= 1 {
            let rule =
                quadrature(Domain::Tet, (dsig - 1 + dv.saturating_sub(1)).min(14)).unwrap();
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let xi = geom.point_from_lambda(p) - se.center;
                let dvals: Vec<V3> = divs.iter().map(|d| d.eval(&xi)).collect();
                let cvals: Vec<V3> = curls.iter().map(|c| c.eval(&xi)).collect();
                let scale = 6.0 * geom.volume * w;
                for a in 0..nv {
                    for b in 0..ns {
                        local[a * ns + b] += scale * cvals[a].dot(&dvals[b]);
                    }
                }
            }
        }
        // interior-face jump terms, one side at a time with the stored sign
        let frule = quadrature(Domain::Tri, (dsig + dv.saturating_sub(1)).min(20)).unwrap();
        for kf in 0..4 {
            let f = mesh.tet_faces[t][kf];
            if mesh.face_boundary[f] {
                continue;
            }
            let s = mesh.tet_face_sign[t][kf] as f64;
            let frame = mesh.face_frame(f);
            let n = frame.normal;
            for (p, w) in frule.points.iter().zip(&frule.weights) {
                let x = frame.point_from_lambda(&[p[0], p[1], p[2]]);
                let xi = x - se.center;
                let scale = 2.0 * frame.area * w;
                let nn_tau: Vec<f64> = se
                    .nodal
                    .iter()
                    .map(|sh| match sh {
                        Shape::Matrix(m) => (n.transpose() * m.eval(&xi) * n)[(0, 0)],
                        _ => unreachable!(),
                    })
                    .collect();
                let ncurl: Vec<f64> = curls.iter().map(|c| n.dot(&c.eval(&xi))).collect();
                for a in 0..nv {
                    if ncurl[a] == 0.0 {
                        continue;
                    }
                    for b in 0..ns {
                        local[a * ns + b] -= s * scale * nn_tau[b] * ncurl[a];
                    }
                }
            }
        }
        let mut out = Vec::new();
        for a in 0..nv {
            if let Some(ra) = vs.free_of_full[vs.cell_dofs[t][a]] {
                for b in 0..ns {
                    if let Some(cb) = ss.free_of_full[ss.cell_dofs[t][b]] {
                        let v = local[a * ns + b];
                        if v != 0.0 {
                            out.push((ra, cb, v));
                        }
                    }
                }
            }
        }
        out
    });
    Ok(SparseMatrix::from_triplets(
        v_space.dim(),
        sigma.dim(),
        trips,
    ))
}

/// Multiplier coupling
/// `C[mu, tau] = -sum_T sum_{F in F(T)} sign(T,F) (n_F x (tau n_F), mu)_F`,
/// which vanishes on tangential-normal continuous fields.
pub fn assemble_c(
    sigma: &Arc<FESpace>,
    lambda: &Arc<FESpace>,
) -> Result<SparseOperator, AssemblyError> {
    check_meshes(sigma, lambda)?;
    let mesh = sigma.mesh.clone();
    let dsig = max_degree(sigma);
    let dlam = match lambda.family {
        Family::Multiplier { k } => k - 1,
        _ => {
            return Err(AssemblyError::Unsupported(
                "lambda space must be a face multiplier".into(),
            ))
        }
    };
    let ss = sigma.clone();
    let ls = lambda.clone();
    let trips = collect_triplets(mesh.tets.len(), |t| {
        let se = &ss.elements[t];
        let rule = quadrature(Domain::Tri, (dsig + dlam).min(20)).unwrap();
        let mut out = Vec::new();
        for kf in 0..4 {
            let f = mesh.tet_faces[t][kf];
            if mesh.face_boundary[f] {
                continue;
            }
            let s = mesh.tet_face_sign[t][kf] as f64;
            let frame = mesh.face_frame(f);
            let n = frame.normal;
            let fields = &ls.face_fields[f];
            let base = ls.face_dof_base(f);
            let mut local = vec![0.0; fields.len() * se.nodal.len()];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let l = [p[0], p[1], p[2]];
                let x = frame.point_from_lambda(&l);
                let xi = x - se.center;
                let scale = 2.0 * frame.area * w;
                let traces: Vec<V3> = se
                    .nodal
                    .iter()
                    .map(|sh| match sh {
                        Shape::Matrix(m) => n.cross(&(m.eval(&xi) * n)),
                        _ => panic!("multiplier coupling needs a matrix space"),
                    })
                    .collect();
                let mus: Vec<V3> = fields.iter().map(|q| q.eval(&l)).collect();
                for (mi, mu) in mus.iter().enumerate() {
                    for (b, tr) in traces.iter().enumerate() {
                        local[mi * se.nodal.len() + b] -= s * scale * tr.dot(mu);
                    }
                }
            }
            for mi in 0..fields.len() {
                if let Some(rm) = ls.free_of_full[base + mi] {
                    for b in 0..se.nodal.len() {
                        if let Some(cb) = ss.free_of_full[ss.cell_dofs[t][b]] {
                            out.push((rm, cb, local[mi * se.nodal.len() + b]));
                        }
                    }
                }
            }
        }
        out
    });
    Ok(SparseMatrix::from_triplets(
        lambda.dim(),
        sigma.dim(),
        trips,
    ))
}

/// Load vector `F[v] = int f . v` by quadrature of the given degree.
pub fn assemble_load(
    v_space: &Arc<FESpace>,
    f: &(dyn Fn(&V3) -> V3 + Sync),
    degree: usize,
) -> Vec<f64> {
    let mesh = v_space.mesh.clone();
    let vs = v_space.clone();
    let parts: Vec<Vec<(usize, f64)>> = (0..mesh.tets.len())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.tet_geometry(t);
            let el = &vs.elements[t];
            let rule = quadrature(Domain::Tet, degree.min(14)).unwrap();
            let mut local = vec![0.0; el.nodal.len()];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let x = geom.point_from_lambda(p);
                let xi = x - el.center;
                let fv = f(&x);
                let scale = 6.0 * geom.volume * w;
                for (a, s) in el.nodal.iter().enumerate() {
                    local[a] += scale * fv.dot(&s.eval(&xi).as_vector());
                }
            }
            let mut out = Vec::new();
            for (a, v) in local.into_iter().enumerate() {
                if let Some(ra) = vs.free_of_full[vs.cell_dofs[t][a]] {
                    out.push((ra, v));
                }
            }
            out
        })
        .collect();
    let mut rhs = vec![0.0; v_space.dim()];
    for part in parts {
        for (r, v) in part {
            rhs[r] += v;
        }
    }
    rhs
}

/// Local transformation applied to basis functions before re-interpolation.
#[derive(Clone, Copy, Debug)]
pub enum LocalMap {
    /// Scalar to vector: gradient.
    Grad,
    /// Vector to matrix: Jacobian (rows are component gradients).
    GradRows,
    /// Matrix to matrix: row-wise curl followed by deviatoric projection.
    DevCurlRows,
}

fn apply_map(map: LocalMap, s: &Shape) -> Shape {
    match (map, s) {
        (LocalMap::Grad, Shape::Scalar(p)) => {
            Shape::Vector(VecPoly3([p.diff(0), p.diff(1), p.diff(2)]))
        }
        (LocalMap::GradRows, Shape::Vector(v)) => Shape::Matrix(v.grad()),
        (LocalMap::DevCurlRows, Shape::Matrix(m)) => Shape::Matrix(m.row_curl().dev()),
        _ => panic!("local map incompatible with shape kind"),
    }
}

/// Interpolates the transformed basis functions of `from` into `to`:
/// column `j` holds the `to`-coefficients of `map(basis_j)`.
///
/// The transformed fields must be conforming for `to` (their defining
/// traces single-valued); each target DoF is then assigned from its owner
/// tet.
pub fn inclusion_matrix(
    from: &Arc<FESpace>,
    to: &Arc<FESpace>,
    map: LocalMap,
) -> Result<SparseOperator, AssemblyError> {
    check_meshes(from, to)?;
    let mesh = from.mesh.clone();
    let fs = from.clone();
    let ts = to.clone();
    let trips = collect_triplets(mesh.tets.len(), |t| {
        let geom = mesh.tet_geometry(t);
        let fe = &fs.elements[t];
        let te = &ts.elements[t];
        let mut out = Vec::new();
        for (i, nod) in fe.nodal.iter().enumerate() {
            let col = match fs.free_of_full[fs.cell_dofs[t][i]] {
                Some(c) => c,
                None => continue,
            };
            let mapped = apply_map(map, nod);
            for (d_idx, dof) in te.dofs.iter().enumerate() {
                let g = ts.cell_dofs[t][d_idx];
                if ts.dof_owner[g] != t {
                    continue;
                }
                if let Some(row) = ts.free_of_full[g] {
                    let v = dof.apply_shape(&geom, &te.center, &mapped);
                    if v.abs() > 0.0 {
                        out.push((row, col, v));
                    }
                }
            }
        }
        out
    });
    Ok(SparseMatrix::from_triplets(to.dim(), from.dim(), trips))
}

/// Verifies that `to_field = map(from_field)` pointwise for a random
/// coefficient vector; returns the worst relative residual.
pub fn verify_inclusion(
    from: &Arc<FESpace>,
    to: &Arc<FESpace>,
    map: LocalMap,
    incl: &SparseOperator,
    seed: u64,
) -> f64 {
    let mut rng = crate::rng::SplitMix64::new(seed);
    let xi_from: Vec<f64> = (0..from.dim()).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let to_coeffs = incl.matvec(&xi_from);
    let from_field = FieldCoefficients::from_coeffs(from.clone(), xi_from);
    let to_field = FieldCoefficients::from_coeffs(to.clone(), to_coeffs);
    let mesh = &from.mesh;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 1e-300;
    for t in 0..mesh.tets.len() {
        let mapped = apply_map(map, &from_field.local_shape(t));
        let target = to_field.local_shape(t);
        let geom = mesh.tet_geometry(t);
        for lam in [
            [0.25, 0.25, 0.25, 0.25],
            [0.6, 0.2, 0.1, 0.1],
            [0.1, 0.1, 0.2, 0.6],
        ] {
            let xi = geom.point_from_lambda(&lam) - from_field.space.elements[t].center;
            let (a, b) = (mapped.eval(&xi), target.eval(&xi));
            let diff = match (a, b) {
                (Value::Matrix(x), Value::Matrix(y)) => (x - y).abs().max(),
                (Value::Vector(x), Value::Vector(y)) => (x - y).abs().max(),
                (Value::Scalar(x), Value::Scalar(y)) => (x - y).abs(),
                _ => f64::INFINITY,
            };
            let mag = match a {
                Value::Matrix(x) => x.abs().max(),
                Value::Vector(x) => x.abs().max(),
                Value::Scalar(x) => x.abs(),
            };
            worst = worst.max(diff);
            scale = scale.max(mag);
        }
    }
    worst / scale.max(1e-300)
}

/// `dev curl` inclusion of the matrix Nédélec space into the traceless
/// space, with a pointwise consistency check.
pub fn assemble_devcurl(
    vm: &Arc<FESpace>,
    sigma: &Arc<FESpace>,
) -> Result<SparseOperator, AssemblyError> {
    let d = inclusion_matrix(vm, sigma, LocalMap::DevCurlRows)?;
    let resid = verify_inclusion(vm, sigma, LocalMap::DevCurlRows, &d, 2024);
    if resid > 1e-10 {
        return Err(AssemblyError::InterpolationResidual {
            tet: 0,
            residual: resid,
        });
    }
    Ok(d)
}

/// Coefficient map of `(grad, mskw x)`: the columns are the matrix-Nédélec
/// coefficients of `grad` of each vector-Lagrange basis function, plus one
/// final column interpolating `mskw(x)`.
pub fn assemble_grad_mskw(
    vgrad3: &Arc<FESpace>,
    vm: &Arc<FESpace>,
) -> Result<SparseOperator, AssemblyError> {
    let incl = inclusion_matrix(vgrad3, vm, LocalMap::GradRows)?;
    let mut trips = Vec::new();
    for r in 0..incl.nrows {
        let (cols, vals) = incl.row(r);
        for (c, v) in cols.iter().zip(vals) {
            trips.push((r, *c, *v));
        }
    }
    let mskw_field = interpolate(vm, &mut |x: &V3| {
        Value::Matrix(crate::poly::mskw(x))
    });
    for (i, &v) in mskw_field.coeffs.iter().enumerate() {
        if v != 0.0 {
            trips.push((i, vgrad3.dim(), v));
        }
    }
    Ok(SparseMatrix::from_triplets(
        vm.dim(),
        vgrad3.dim() + 1,
        trips,
    ))
}
