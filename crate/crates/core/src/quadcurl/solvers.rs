//! Mixed and hybridized solvers for the quad-curl system.
//!
//! The mixed solver couples the tangential-normal continuous stress with
//! the constrained Nédélec and Lagrange spaces in one saddle system. The
//! hybridized solver breaks the stress, enforces its continuity by a face
//! multiplier, eliminates the stress element-wise, and solves the condensed
//! symmetric-indefinite system in `(u, lambda, phi)`.

use super::*;
use crate::assembly::{
    assemble_b, assemble_c, assemble_grad_coupling, assemble_grad_stiffness, assemble_load,
    assemble_mass, FESpace, SparseOperator,
};
use crate::elements::Family;
use crate::linalg::{factor_solve, SolveOptions, SparseMatrix};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Quadrature degree for the right-hand side and error norms.
    pub quad_degree: usize,
    /// Relative residual target of the direct solver.
    pub solve_tol: f64,
    /// Removes the discrete-gradient component the load picks up from
    /// quadrature, so that divergence-free loads give `phi_h = 0` on every
    /// mesh. The correction is of quadrature-error size and does not affect
    /// convergence orders.
    pub project_load: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            quad_degree: 10,
            solve_tol: 1e-10,
            project_load: true,
        }
    }
}

struct CommonSpaces {
    v: Arc<FESpace>,
    q: Arc<FESpace>,
    g: SparseOperator,
    rhs: Vec<f64>,
}

fn common_spaces(
    mesh: &Arc<TetMesh>,
    k: usize,
    l: usize,
    exact: &ManufacturedSolution,
    opts: &SolverOptions,
) -> Result<CommonSpaces, SolveError> {
    let v = FESpace::build(Family::Nedelec { k, l }, mesh.clone(), true)?;
    let q = FESpace::build(Family::Lagrange { m: l + 1 }, mesh.clone(), true)?;
    let g = assemble_grad_coupling(&q, &v)?;
    let f_field = &exact.f;
    let mut rhs = assemble_load(&v, &move |x: &V3| f_field.eval(x), opts.quad_degree);
    if opts.project_load && q.dim() > 0 {
        // F[grad psi] should vanish for divergence-free f; subtract the
        // defect G y with (grad phi_i, grad phi_j) y = F[grad psi_i].
        // Since G = M_V * Incl, the corrected load is F - G y.
        let incl = crate::assembly::inclusion_matrix(&q, &v, crate::assembly::LocalMap::Grad)?;
        let gtf = incl.matvec_transpose(&rhs);
        let a_phi = assemble_grad_stiffness(&q);
        let y = factor_solve(
            &a_phi,
            &gtf,
            &SolveOptions {
                tol: opts.solve_tol,
                ..Default::default()
            },
        )?;
        let gy = g.matvec(&y);
        for i in 0..rhs.len() {
            rhs[i] -= gy[i];
        }
    }
    Ok(CommonSpaces { v, q, g, rhs })
}

/// Solves the mixed method in the tangential-normal continuous stress
/// space; the full saddle system is assembled and factored monolithically.
pub fn solve_mixed(
    mesh: &Arc<TetMesh>,
    k: usize,
    l: usize,
    exact: &ManufacturedSolution,
    opts: &SolverOptions,
) -> Result<QuadCurlSolution, SolveError> {
    let sigma = FESpace::build(Family::SigmaTn { k: k - 1 }, mesh.clone(), false)?;
    let common = common_spaces(mesh, k, l, exact, opts)?;
    let (v, q) = (common.v.clone(), common.q.clone());
    let m = assemble_mass(&sigma);
    let b = assemble_b(&sigma, &v)?;
    let (ns, nu, nq) = (sigma.dim(), v.dim(), q.dim());
    let n = ns + nu + nq;

    let mut trips = Vec::with_capacity(m.nnz() + 2 * b.nnz() + 2 * common.g.nnz());
    for r in 0..ns {
        let (cols, vals) = m.row(r);
        for (c, val) in cols.iter().zip(vals) {
            trips.push((r, *c, *val));
        }
    }
    for r in 0..nu {
        let (cols, vals) = b.row(r);
        for (c, val) in cols.iter().zip(vals) {
            trips.push((ns + r, *c, *val));
            trips.push((*c, ns + r, *val));
        }
    }
    for r in 0..nu {
        let (cols, vals) = common.g.row(r);
        for (c, val) in cols.iter().zip(vals) {
            trips.push((ns + r, ns + nu + *c, *val));
            trips.push((ns + nu + *c, ns + r, *val));
        }
    }
    let system = SparseMatrix::from_triplets(n, n, trips);
    let mut rhs = vec![0.0; n];
    for i in 0..nu {
        rhs[ns + i] = -common.rhs[i];
    }
    let mut signs = vec![1i8; n];
    for s in signs.iter_mut().skip(ns).take(nu) {
        *s = -1;
    }
    let x = factor_solve(
        &system,
        &rhs,
        &SolveOptions {
            tol: opts.solve_tol,
            signs: Some(signs),
            ..Default::default()
        },
    )?;

    let resid = {
        let ax = system.matvec(&x);
        let num: f64 = ax
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        num / den
    };

    Ok(QuadCurlSolution {
        mesh: mesh.clone(),
        k,
        l,
        sigma: FieldCoefficients::from_coeffs(sigma, x[..ns].to_vec()),
        u: FieldCoefficients::from_coeffs(v.clone(), x[ns..ns + nu].to_vec()),
        phi: FieldCoefficients::from_coeffs(q, x[ns + nu..].to_vec()),
        lambda: None,
        residual: resid,
        dofs_u: nu,
        dofs_lambda: 0,
        dofs_phi: common.q.dim(),
    })
}

/// Per-tet data for static condensation.
struct LocalBlocks {
    sdofs: Vec<usize>,
    rows: Vec<usize>, // condensed unknown ids (u then lambda)
    m_inv: DMatrix<f64>,
    r: DMatrix<f64>, // rows x sigma
}

fn local_blocks(
    t: usize,
    sigma_b: &FESpace,
    v: &FESpace,
    lambda: &FESpace,
    m: &SparseOperator,
    bt: &SparseOperator,
    ct: &SparseOperator,
    nu: usize,
) -> LocalBlocks {
    let mesh = &sigma_b.mesh;
    let sdofs: Vec<usize> = sigma_b.cell_dofs[t]
        .iter()
        .map(|&g| sigma_b.free_of_full[g].unwrap())
        .collect();
    // condensed row ids: free u dofs of the tet, then lambda dofs of its
    // interior faces
    let mut rows = Vec::new();
    for &g in &v.cell_dofs[t] {
        if let Some(j) = v.free_of_full[g] {
            rows.push(j);
        }
    }
    let nu_loc = rows.len();
    for kf in 0..4 {
        let f = mesh.tet_faces[t][kf];
        if !mesh.face_boundary[f] {
            let base = lambda.face_dof_base(f);
            for i in 0..lambda.counts.face {
                rows.push(nu + lambda.free_of_full[base + i].unwrap());
            }
        }
    }
    let ns = sdofs.len();
    let mut m_t = DMatrix::zeros(ns, ns);
    for (a, &ga) in sdofs.iter().enumerate() {
        let (cols, vals) = m.row(ga);
        for (c, val) in cols.iter().zip(vals) {
            if let Some(b) = sdofs.iter().position(|&x| x == *c) {
                m_t[(a, b)] = *val;
            }
        }
    }
    let m_inv = m_t.try_inverse().expect("element mass invertible");
    let mut r = DMatrix::zeros(rows.len(), ns);
    for (b, &gs) in sdofs.iter().enumerate() {
        // row gs of B^T: columns are u dofs of this tet
        let (cols, vals) = bt.row(gs);
        for (c, val) in cols.iter().zip(vals) {
            let pos = rows[..nu_loc].iter().position(|&x| x == *c);
            if let Some(a) = pos {
                r[(a, b)] = *val;
            }
        }
        let (cols, vals) = ct.row(gs);
        for (c, val) in cols.iter().zip(vals) {
            let pos = rows[nu_loc..].iter().position(|&x| x == nu + *c);
            if let Some(a) = pos {
                r[(nu_loc + a, b)] = *val;
            }
        }
    }
    LocalBlocks {
        sdofs,
        rows,
        m_inv,
        r,
    }
}

/// Solves the hybridized method: broken stress, multiplier-enforced
/// continuity, element-wise elimination, condensed solve in
/// `(u, lambda, phi)`, then stress recovery.
pub fn solve_hybrid(
    mesh: &Arc<TetMesh>,
    k: usize,
    l: usize,
    exact: &ManufacturedSolution,
    opts: &SolverOptions,
) -> Result<QuadCurlSolution, SolveError> {
    let sigma_b = FESpace::build_broken(Family::SigmaTn { k: k - 1 }, mesh.clone())?;
    let lambda = FESpace::build(Family::Multiplier { k }, mesh.clone(), true)?;
    let common = common_spaces(mesh, k, l, exact, opts)?;
    let (v, q) = (common.v.clone(), common.q.clone());

    let m = assemble_mass(&sigma_b);
    let b = assemble_b(&sigma_b, &v)?;
    let c = assemble_c(&sigma_b, &lambda)?;
    let bt = b.transpose();
    let ct = c.transpose();

    let (nu, nl, nq) = (v.dim(), lambda.dim(), q.dim());
    let n = nu + nl + nq;
    let nt = mesh.tets.len();

    // Schur triplets per element.
    let schur: Vec<Vec<(usize, usize, f64)>> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let blk = local_blocks(t, &sigma_b, &v, &lambda, &m, &bt, &ct, nu);
            let s = &blk.r * &blk.m_inv * blk.r.transpose();
            let mut out = Vec::with_capacity(blk.rows.len() * blk.rows.len());
            for (a, &ra) in blk.rows.iter().enumerate() {
                for (bcol, &rb) in blk.rows.iter().enumerate() {
                    let val = s[(a, bcol)];
                    if val != 0.0 {
                        out.push((ra, rb, val));
                    }
                }
            }
            out
        })
        .collect();
    let mut trips: Vec<(usize, usize, f64)> = schur.into_iter().flatten().collect();
    for r in 0..nu {
        let (cols, vals) = common.g.row(r);
        for (cc, val) in cols.iter().zip(vals) {
            trips.push((r, nu + nl + *cc, -*val));
            trips.push((nu + nl + *cc, r, -*val));
        }
    }
    let system = SparseMatrix::from_triplets(n, n, trips);
    let mut rhs = vec![0.0; n];
    rhs[..nu].copy_from_slice(&common.rhs);
    let mut signs = vec![1i8; n];
    for s in signs.iter_mut().skip(nu + nl) {
        *s = -1;
    }
    let x = factor_solve(
        &system,
        &rhs,
        &SolveOptions {
            tol: opts.solve_tol,
            signs: Some(signs),
            ..Default::default()
        },
    )?;

    // Stress recovery per element: sigma = -M^-1 R^T [u; lambda].
    let sigma_cols: Vec<Vec<(usize, f64)>> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let blk = local_blocks(t, &sigma_b, &v, &lambda, &m, &bt, &ct, nu);
            let mut loc = DVector::zeros(blk.rows.len());
            for (a, &ra) in blk.rows.iter().enumerate() {
                loc[a] = x[ra];
            }
            let s = -(&blk.m_inv * (blk.r.transpose() * loc));
            blk.sdofs
                .iter()
                .enumerate()
                .map(|(i, &g)| (g, s[i]))
                .collect()
        })
        .collect();
    let mut sigma_coeffs = vec![0.0; sigma_b.dim()];
    for col in sigma_cols {
        for (g, val) in col {
            sigma_coeffs[g] = val;
        }
    }

    let u = x[..nu].to_vec();
    let lam = x[nu..nu + nl].to_vec();
    let phi = x[nu + nl..].to_vec();

    // Residual of the full four-field system.
    let residual = {
        let r_tau = {
            let mut r = m.matvec(&sigma_coeffs);
            let bu = b.matvec_transpose(&u);
            let cl = c.matvec_transpose(&lam);
            for i in 0..r.len() {
                r[i] += bu[i] + cl[i];
            }
            r
        };
        let r_v = {
            let mut r = b.matvec(&sigma_coeffs);
            let gphi = common.g.matvec(&phi);
            for i in 0..r.len() {
                r[i] += gphi[i] + common.rhs[i];
            }
            r
        };
        let r_mu = c.matvec(&sigma_coeffs);
        let r_psi = common.g.matvec_transpose(&u);
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        let num = (sq(&r_tau) + sq(&r_v) + sq(&r_mu) + sq(&r_psi)).sqrt();
        let den = sq(&common.rhs).sqrt().max(1e-300);
        num / den
    };

    Ok(QuadCurlSolution {
        mesh: mesh.clone(),
        k,
        l,
        sigma: FieldCoefficients::from_coeffs(sigma_b, sigma_coeffs),
        u: FieldCoefficients::from_coeffs(v, u),
        phi: FieldCoefficients::from_coeffs(q, phi),
        lambda: Some(FieldCoefficients::from_coeffs(lambda, lam)),
        residual,
        dofs_u: nu,
        dofs_lambda: nl,
        dofs_phi: nq,
    })
}

/// Blockwise relative differences between two solutions on the same mesh.
#[derive(Clone, Debug)]
pub struct BlockDiff {
    pub sigma: f64,
    pub u: f64,
    pub phi: f64,
}

pub fn compare_solutions(a: &QuadCurlSolution, b: &QuadCurlSolution) -> BlockDiff {
    let mesh = &a.mesh;
    // sigma blocks may live in different spaces; compare in L2.
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for t in 0..mesh.tets.len() {
        let geom = mesh.tet_geometry(t);
        let pa = a.sigma.local_mat(t);
        let pb = b.sigma.local_mat(t);
        let ca = a.sigma.space.elements[t].center;
        let cb = b.sigma.space.elements[t].center;
        let deg = 2 * pa.0.iter().flatten().map(|p| p.deg).max().unwrap().max(1);
        num += crate::polyquad::integrate_tet(&geom, deg, |x| {
            (pa.eval(&(x - ca)) - pb.eval(&(x - cb))).norm_squared()
        });
        den += crate::polyquad::integrate_tet(&geom, deg, |x| pa.eval(&(x - ca)).norm_squared());
    }
    let vec_rel = |x: &[f64], y: &[f64]| {
        let num: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        num / den.max(1e-300)
    };
    BlockDiff {
        sigma: num.sqrt() / den.sqrt().max(1e-300),
        u: vec_rel(&a.u.coeffs, &b.u.coeffs),
        phi: {
            let nx: f64 = a.phi.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny: f64 = b
                .phi
                .coeffs
                .iter()
                .zip(&a.phi.coeffs)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            // phi is zero for divergence-free loads; compare absolutely
            // against the u scale.
            let uscale: f64 = a.u.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nx > 1e-8 * uscale {
                ny / nx
            } else {
                ny / uscale.max(1e-300)
            }
        },
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_mass, interpolate};
    use crate::elements::Value;
    use crate::fields::{MatrixField, ScalarField, VectorField};
    use crate::polyquad::integrate_tet;

    fn zero_exact() -> ManufacturedSolution {
        ManufacturedSolution {
            u: VectorField::zero(),
            curl_u: VectorField::zero(),
            sigma: MatrixField(std::array::from_fn(|_| {
                std::array::from_fn(|_| ScalarField::zero())
            })),
            f: VectorField::zero(),
        }
    }

    fn mesh_n2() -> Arc<TetMesh> {
        Arc::new(TetMesh::build_cube_mesh(2).unwrap().perturb(0.2, 42).unwrap())
    }

    #[test]
    fn zero_load_gives_zero_solution() {
        let mesh = mesh_n2();
        let exact = zero_exact();
        let opts = SolverOptions::default();
        for (k, l) in [(1, 0), (1, 1)] {
            let mixed = solve_mixed(&mesh, k, l, &exact, &opts).unwrap();
            assert!(mixed.sigma.norm_inf() == 0.0);
            assert!(mixed.u.norm_inf() == 0.0);
            assert!(mixed.phi.norm_inf() == 0.0);
            let hybrid = solve_hybrid(&mesh, k, l, &exact, &opts).unwrap();
            assert!(hybrid.sigma.norm_inf() == 0.0);
            assert!(hybrid.u.norm_inf() == 0.0);
            assert!(hybrid.lambda.as_ref().unwrap().norm_inf() == 0.0);
        }
    }

    #[test]
    fn mixed_hybrid_equivalence() {
        let mesh = mesh_n2();
        let exact = manufactured();
        let opts = SolverOptions::default();
        for (k, l) in [(1, 0), (1, 1)] {
            let mixed = solve_mixed(&mesh, k, l, &exact, &opts).unwrap();
            let hybrid = solve_hybrid(&mesh, k, l, &exact, &opts).unwrap();
            assert!(mixed.residual <= 1e-10);
            assert!(hybrid.residual <= 1e-10);
            let diff = compare_solutions(&mixed, &hybrid);
            assert!(
                diff.sigma <= 1e-9 && diff.u <= 1e-9 && diff.phi <= 1e-9,
                "(k,l)=({k},{l}): sigma {:.2e} u {:.2e} phi {:.2e}",
                diff.sigma,
                diff.u,
                diff.phi
            );
        }
    }

    #[test]
    fn recovered_stress_satisfies_multiplier_equation() {
        let mesh = mesh_n2();
        let exact = manufactured();
        let sol = solve_hybrid(&mesh, 1, 0, &exact, &SolverOptions::default()).unwrap();
        let lambda = sol.lambda.as_ref().unwrap();
        let c = assemble_c(&sol.sigma.space, &lambda.space).unwrap();
        let ct = c.matvec(&sol.sigma.coeffs);
        let worst = ct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = c.max_abs() * sol.sigma.norm_inf();
        assert!(worst <= 1e-10 * scale.max(1.0), "C sigma = {worst:.3e}");
    }

    #[test]
    fn error_equation_identity() {
        // A_h(I sigma - sigma_h, 0, I u - u_h; tau, psi, v)
        //   = (I sigma - sigma, tau) + (I u - u, grad psi)
        // checked blockwise against independent quadrature of the exact
        // moments; residuals sit at load-quadrature accuracy.
        let mesh = Arc::new(
            TetMesh::build_cube_mesh(2)
                .unwrap()
                .perturb(0.2, 42)
                .unwrap()
                .refine_uniform()
                .unwrap(),
        );
        let exact = manufactured();
        let opts = SolverOptions {
            project_load: false,
            ..Default::default()
        };
        let (k, l) = (1, 0);
        let sol = solve_mixed(&mesh, k, l, &exact, &opts).unwrap();
        let sigma = sol.sigma.space.clone();
        let v = sol.u.space.clone();
        let q = sol.phi.space.clone();
        let m = assemble_mass(&sigma);
        let b = assemble_b(&sigma, &v).unwrap();
        let g = assemble_grad_coupling(&q, &v).unwrap();
        let i_sigma = interpolate(&sigma, &mut |x: &V3| Value::Matrix(exact.sigma_at(x)));
        let i_u = interpolate(&v, &mut |x: &V3| Value::Vector(exact.u_at(x)));

        // exact moments by quadrature
        let deg = 12;
        let mut m_sigma = vec![0.0; sigma.dim()];
        for t in 0..mesh.tets.len() {
            let geom = mesh.tet_geometry(t);
            let el = &sigma.elements[t];
            for (i, s) in el.nodal.iter().enumerate() {
                if let Some(r) = sigma.free_of_full[sigma.cell_dofs[t][i]] {
                    m_sigma[r] += integrate_tet(&geom, deg, |x| {
                        exact.sigma_at(x).dot(&s.eval(&(x - el.center)).as_matrix())
                    });
                }
            }
        }

        let dv = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x - y).collect()
        };
        let nrm = |a: &[f64]| a.iter().map(|x| x * x).sum::<f64>().sqrt();

        let dsig = dv(&i_sigma.coeffs, &sol.sigma.coeffs);
        let du = dv(&i_u.coeffs, &sol.u.coeffs);

        // tau block
        let mut lhs_tau = m.matvec(&dsig);
        let btu = b.matvec_transpose(&du);
        for i in 0..lhs_tau.len() {
            lhs_tau[i] += btu[i];
        }
        let mut rhs_tau = m.matvec(&i_sigma.coeffs);
        for i in 0..rhs_tau.len() {
            rhs_tau[i] -= m_sigma[i];
        }
        let tau_resid = nrm(&dv(&lhs_tau, &rhs_tau)) / nrm(&m_sigma).max(1e-300);
        assert!(tau_resid < 1e-7, "tau block residual {tau_resid:.3e}");

        // psi block: G^T(Iu - u_h) vs (Iu - u, grad psi)
        let lhs_psi = g.matvec_transpose(&du);
        let mut m_grad = vec![0.0; q.dim()];
        for t in 0..mesh.tets.len() {
            let geom = mesh.tet_geometry(t);
            let el = &q.elements[t];
            for (i, s) in el.nodal.iter().enumerate() {
                if let Some(r) = q.free_of_full[q.cell_dofs[t][i]] {
                    let grad = match s {
                        crate::elements::Shape::Scalar(p) => {
                            crate::poly::VecPoly3([p.diff(0), p.diff(1), p.diff(2)])
                        }
                        _ => unreachable!(),
                    };
                    m_grad[r] += integrate_tet(&geom, deg, |x| {
                        exact.u_at(x).dot(&grad.eval(&(x - el.center)))
                    });
                }
            }
        }
        let gt_iu = g.matvec_transpose(&i_u.coeffs);
        let rhs_psi: Vec<f64> = gt_iu.iter().zip(&m_grad).map(|(a, b)| a - b).collect();
        let psi_resid = nrm(&dv(&lhs_psi, &rhs_psi)) / nrm(&gt_iu).max(1e-300);
        assert!(psi_resid < 1e-7, "psi block residual {psi_resid:.3e}");

        // v block: B(I sigma - sigma_h) = B I sigma + F (+ G phi_h) ~ 0
        let f_field = &exact.f;
        let rhs_load = crate::assembly::assemble_load(&v, &move |x: &V3| f_field.eval(x), 10);
        let mut vblock = b.matvec(&i_sigma.coeffs);
        let gphi = g.matvec(&sol.phi.coeffs);
        for i in 0..vblock.len() {
            vblock[i] += rhs_load[i] + gphi[i];
        }
        let v_resid = nrm(&vblock) / nrm(&rhs_load).max(1e-300);
        assert!(v_resid < 1e-5, "v block residual {v_resid:.3e}");
    }
}
