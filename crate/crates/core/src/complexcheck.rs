//! Certification of the discrete curl-div complex on small meshes: rank
//! and dimension identities, commuting interpolation identities, discrete
//! Poincaré constants and the grad-curl norm equivalence.

use crate::assembly::{
    assemble_b, assemble_curlcurl, assemble_devcurl, assemble_grad_coupling, assemble_grad_mskw,
    assemble_mass, interpolate_on_tets, FESpace, FieldCoefficients,
};
use crate::elements::{Family, Value};
use crate::fields::{Factor1D, MatrixField, ScalarField, VectorField, Wave};
use crate::linalg::{
    nullspace_of_transpose, rank_nullity, smallest_generalized_eig, Factorization, LinalgError,
    SolveOptions, RANK_TOL, SVD_SIZE_LIMIT,
};
use crate::mesh::{TetMesh, V3};
use crate::poly::{mskw, MatPoly3};
use crate::polyquad::{integrate_face, integrate_tet, quadrature, Domain};
use crate::quadcurl::SolveError;
use crate::rng::SplitMix64;
use nalgebra::DMatrix;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct CheckEntry {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckEntry {
    fn new(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        let pass = value <= threshold;
        Self {
            name: name.into(),
            value,
            threshold,
            pass,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ComplexDims {
    pub vgrad3_plus_r: usize,
    pub vm: usize,
    pub sigma: usize,
    pub vcurl: usize,
    pub vgrad: usize,
    pub rank_b: usize,
    pub rank_d: usize,
    pub rank_p: usize,
    pub dim_khc: usize,
}

#[derive(Clone, Debug, Default)]
pub struct ComplexReport {
    pub k: usize,
    pub l: usize,
    pub dims: ComplexDims,
    pub entries: Vec<CheckEntry>,
}

impl ComplexReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "identity,residual,threshold,pass")?;
        for e in &self.entries {
            writeln!(w, "{},{:e},{:e},{}", e.name, e.value, e.threshold, e.pass)?;
        }
        Ok(())
    }
}

impl std::fmt::Display for ComplexReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "complex (k={}, l={}): dims V^grad(R3)+R={} V^curl(M)={} Sigma={} V0^curl={} V0^grad={}",
            self.k, self.l, self.dims.vgrad3_plus_r, self.dims.vm, self.dims.sigma,
            self.dims.vcurl, self.dims.vgrad
        )?;
        writeln!(
            f,
            "  ranks: B={} D={} (grad,mskw)={} dim K_h^c={}",
            self.dims.rank_b, self.dims.rank_d, self.dims.rank_p, self.dims.dim_khc
        )?;
        for e in &self.entries {
            writeln!(
                f,
                "  [{}] {}: {:.3e} (<= {:.3e})",
                if e.pass { "pass" } else { "FAIL" },
                e.name,
                e.value,
                e.threshold
            )?;
        }
        Ok(())
    }
}

/// Spaces shared by the structural checks.
struct ComplexSpaces {
    sigma: Arc<FESpace>,
    v: Arc<FESpace>,
    q: Arc<FESpace>,
    vm: Arc<FESpace>,
    vg3: Arc<FESpace>,
}

fn complex_spaces(mesh: &Arc<TetMesh>, k: usize, l: usize) -> Result<ComplexSpaces, SolveError> {
    Ok(ComplexSpaces {
        sigma: FESpace::build(Family::SigmaTn { k: k - 1 }, mesh.clone(), false)?,
        v: FESpace::build(Family::Nedelec { k, l }, mesh.clone(), true)?,
        q: FESpace::build(Family::Lagrange { m: l + 1 }, mesh.clone(), true)?,
        vm: FESpace::build(Family::NedelecMatrix { k }, mesh.clone(), false)?,
        vg3: FESpace::build(Family::LagrangeVector { m: k + 1 }, mesh.clone(), false)?,
    })
}

/// Verifies the exactness identities of the discrete complex by dense SVD
/// rank computations. Residual thresholds scale with `tol` (default 1e-8).
pub fn verify_complex(
    mesh: &Arc<TetMesh>,
    k: usize,
    l: usize,
    tol: f64,
) -> Result<ComplexReport, SolveError> {
    let sp = complex_spaces(mesh, k, l)?;
    if sp.sigma.dim() > SVD_SIZE_LIMIT {
        return Err(SolveError::Linalg(LinalgError::TooLarge {
            n: sp.sigma.dim(),
            cap: SVD_SIZE_LIMIT,
        }));
    }
    let b = assemble_b(&sp.sigma, &sp.v)?;
    let d = assemble_devcurl(&sp.vm, &sp.sigma)?;
    let p = assemble_grad_mskw(&sp.vg3, &sp.vm)?;
    let g = assemble_grad_coupling(&sp.q, &sp.v)?;

    let (rank_b, nullity_b) = rank_nullity(&b, RANK_TOL).map_err(SolveError::Linalg)?;
    let (rank_d, nullity_d) = rank_nullity(&d, RANK_TOL).map_err(SolveError::Linalg)?;
    let (rank_p, _) = rank_nullity(&p, RANK_TOL).map_err(SolveError::Linalg)?;
    let (rank_g, _) = rank_nullity(&g, RANK_TOL).map_err(SolveError::Linalg)?;
    let dim_khc = sp.v.dim() - rank_g;

    let mut entries = Vec::new();

    // (i) B D = 0.
    let dt = d.transpose();
    let mut bd_max = 0.0f64;
    for j in 0..sp.vm.dim() {
        let (cols, vals) = dt.row(j);
        let mut col = vec![0.0; sp.sigma.dim()];
        for (c, v) in cols.iter().zip(vals) {
            col[*c] = *v;
        }
        let bcol = b.matvec(&col);
        bd_max = bd_max.max(bcol.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let scale_bd = b.max_abs().max(1e-300) * d.max_abs().max(1e-300);
    entries.push(CheckEntry::new("BD=0", bd_max, tol * scale_bd));

    // (ii) rank(B) = dim V0curl - dim V0grad.
    let expect_rank_b = sp.v.dim() - sp.q.dim();
    entries.push(CheckEntry::new(
        "rank(B)=dimV0curl-dimV0grad",
        (rank_b as f64 - expect_rank_b as f64).abs(),
        0.5,
    ));

    // (iii) nullity(B) = rank(D).
    entries.push(CheckEntry::new(
        "nullity(B)=rank(D)",
        (nullity_b as f64 - rank_d as f64).abs(),
        0.5,
    ));

    // (iv) dim Sigma = rank(D) + dim K_h^c.
    entries.push(CheckEntry::new(
        "dimSigma=rank(D)+dimK",
        (sp.sigma.dim() as f64 - (rank_d + dim_khc) as f64).abs(),
        0.5,
    ));

    // (v) ker(grad, mskw x) is the constant fields.
    let expect_rank_p = sp.vg3.dim() + 1 - 3;
    entries.push(CheckEntry::new(
        "ker(grad,mskw)=R3",
        (rank_p as f64 - expect_rank_p as f64).abs(),
        0.5,
    ));

    // exactness at the matrix-Nedelec node: nullity(D) = rank(grad, mskw).
    entries.push(CheckEntry::new(
        "nullity(D)=rank(grad,mskw)",
        (nullity_d as f64 - rank_p as f64).abs(),
        0.5,
    ));

    Ok(ComplexReport {
        k,
        l,
        dims: ComplexDims {
            vgrad3_plus_r: sp.vg3.dim() + 1,
            vm: sp.vm.dim(),
            sigma: sp.sigma.dim(),
            vcurl: sp.v.dim(),
            vgrad: sp.q.dim(),
            rank_b,
            rank_d,
            rank_p,
            dim_khc,
        },
        entries,
    })
}

/// Random smooth traceless matrix field from low-frequency waves.
fn random_trig_matrix(rng: &mut SplitMix64) -> MatrixField {
    let wave = |rng: &mut SplitMix64| {
        let f = |rng: &mut SplitMix64| Factor1D {
            freq: PI,
            offset: rng.uniform(0.0, 2.0 * PI),
            quarter: 0,
        };
        Wave {
            amp: rng.uniform(-1.0, 1.0),
            factors: [f(rng), f(rng), f(rng)],
        }
    };
    let entry = |rng: &mut SplitMix64| ScalarField::from_waves(vec![wave(rng), wave(rng)]);
    let m = MatrixField(std::array::from_fn(|_| {
        std::array::from_fn(|_| entry(rng))
    }));
    m.dev()
}

/// Random smooth vector field with vanishing tangential boundary trace on
/// the unit cube: every separable factor vanishes at 0 and 1.
fn random_h0curl_vector(rng: &mut SplitMix64) -> VectorField {
    let comp = |rng: &mut SplitMix64| {
        let wave = |rng: &mut SplitMix64| Wave {
            amp: rng.uniform(-1.0, 1.0),
            factors: std::array::from_fn(|_| Factor1D::sin(PI * (1 + rng.below(2)) as f64)),
        };
        ScalarField::from_waves(vec![wave(rng), wave(rng)])
    };
    VectorField([comp(rng), comp(rng), comp(rng)])
}

/// Composite tet quadrature: recursive red split of the integration domain
/// so trigonometric integrands reach rounding accuracy even on the
/// coarsest meshes.
fn composite_tet(verts: [V3; 4], depth: usize, degree: usize, f: &mut dyn FnMut(&V3) -> f64) -> f64 {
    if depth == 0 {
        let geom = crate::mesh::TetGeometry::new(verts);
        return integrate_tet(&geom, degree, f);
    }
    let m = |a: usize, b: usize| (verts[a] + verts[b]) * 0.5;
    let (m01, m02, m03, m12, m13, m23) = (m(0, 1), m(0, 2), m(0, 3), m(1, 2), m(1, 3), m(2, 3));
    let children = [
        [verts[0], m01, m02, m03],
        [m01, verts[1], m12, m13],
        [m02, m12, verts[2], m23],
        [m03, m13, m23, verts[3]],
        [m01, m23, m02, m03],
        [m01, m23, m03, m13],
        [m01, m23, m13, m12],
        [m01, m23, m12, m02],
    ];
    children
        .into_iter()
        .map(|c| {
            // orientation does not matter for integration; fix it anyway
            let vol = (c[1] - c[0]).cross(&(c[2] - c[0])).dot(&(c[3] - c[0]));
            let c = if vol < 0.0 { [c[0], c[1], c[3], c[2]] } else { c };
            composite_tet(c, depth - 1, degree, f)
        })
        .sum()
}

/// Composite triangle quadrature by recursive 4-way split.
fn composite_face(
    verts: [V3; 3],
    depth: usize,
    degree: usize,
    f: &mut dyn FnMut(&V3) -> f64,
) -> f64 {
    if depth == 0 {
        let frame = crate::mesh::FaceFrame::new(verts);
        return integrate_face(&frame, degree, f);
    }
    let m = |a: usize, b: usize| (verts[a] + verts[b]) * 0.5;
    let (m01, m02, m12) = (m(0, 1), m(0, 2), m(1, 2));
    [
        [verts[0], m01, m02],
        [m01, verts[1], m12],
        [m02, m12, verts[2]],
        [m01, m12, m02],
    ]
    .into_iter()
    .map(|c| composite_face(c, depth - 1, degree, f))
    .sum()
}

/// Residuals of the commuting identities for `samples` random fields.
///
/// Polynomial samples are measured against 1e-12, trigonometric ones
/// against 1e-9 (quadrature accuracy governs the latter).
pub fn verify_commuting(
    mesh: &Arc<TetMesh>,
    k: usize,
    l: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<CheckEntry>, SolveError> {
    let sp = complex_spaces(mesh, k, l)?;
    let b = assemble_b(&sp.sigma, &sp.v)?;
    let g = assemble_grad_coupling(&sp.q, &sp.v)?;
    let s_curl = assemble_curlcurl(&sp.v);
    let mut rng = SplitMix64::new(seed);
    let mut entries = Vec::new();
    let quad_deg = 14usize;

    let vnorm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();

    // --- interpolate-then-apply identity for polynomial tau.
    {
        let mut worst = 0.0f64;
        for _ in 0..samples.min(5) {
            // random traceless matrix polynomial of degree <= k-1, globally
            // smooth (a single polynomial in x across the mesh)
            let mut tau = MatPoly3::zero(k - 1);
            for i in 0..3 {
                for j in 0..3 {
                    for c in tau.0[i][j].c.iter_mut() {
                        *c = rng.uniform(-1.0, 1.0);
                    }
                }
            }
            let tau = tau.dev();
            let tau_i = crate::assembly::interpolate(&sp.sigma, &mut |x: &V3| {
                Value::Matrix(tau.eval(x))
            });
            let lhs = b.matvec(&tau_i.coeffs);
            let divp = tau.row_div();
            let rhs = weak_curldiv_smooth(mesh, &sp.v, &mut |x| divp.eval(x), 2 * k);
            let op_scale = b.max_abs() * vnorm(&tau_i.coeffs);
            let scale = vnorm(&lhs).max(vnorm(&rhs)).max(op_scale).max(1e-300);
            let diff: f64 = lhs
                .iter()
                .zip(&rhs)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(diff / scale);
        }
        entries.push(CheckEntry::new("interp-commute polynomial", worst, 1e-12));
    }

    // --- same identity for trigonometric tau.
    {
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let tau = random_trig_matrix(&mut rng);
            let tau_i = crate::assembly::interpolate(&sp.sigma, &mut |x: &V3| {
                Value::Matrix(tau.eval(x))
            });
            let lhs = b.matvec(&tau_i.coeffs);
            let div_tau = tau.row_div();
            let rhs = weak_curldiv_smooth(mesh, &sp.v, &mut |x| div_tau.eval(x), quad_deg);
            let scale = vnorm(&lhs).max(vnorm(&rhs)).max(1e-300);
            let diff: f64 = lhs
                .iter()
                .zip(&rhs)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(diff / scale);
        }
        entries.push(CheckEntry::new(
            "interp-commute trigonometric",
            worst,
            1e-9,
        ));
    }

    // --- adjoint identity: the weak form of a discrete stress against a
    //     smooth test equals its pairing with the test's interpolant.
    {
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let tau_coeffs: Vec<f64> = (0..sp.sigma.dim())
                .map(|_| rng.uniform(-1.0, 1.0))
                .collect();
            let tau_h = FieldCoefficients::from_coeffs(sp.sigma.clone(), tau_coeffs);
            let v_field = random_h0curl_vector(&mut rng);
            let curl_v = v_field.curl();

            let mut lhs = 0.0;
            for t in 0..mesh.tets.len() {
                let geom = mesh.tet_geometry(t);
                let divp = tau_h.local_mat(t).row_div();
                let verts = geom.verts;
                lhs += composite_tet(verts, 2, quad_deg, &mut |x| {
                    divp.eval(&(x - geom.barycenter)).dot(&curl_v.eval(x))
                });
            }
            for f in 0..mesh.faces.len() {
                if mesh.face_boundary[f] {
                    continue;
                }
                let frame = mesh.face_frame(f);
                let n = frame.normal;
                let [tp, tm] = mesh.face_tets[f];
                let (tp, tm) = (tp.unwrap(), tm.unwrap());
                let (gp, gm) = (mesh.tet_geometry(tp), mesh.tet_geometry(tm));
                let (pp, pm) = (tau_h.local_mat(tp), tau_h.local_mat(tm));
                lhs -= composite_face(frame.verts, 2, quad_deg.min(20), &mut |x| {
                    let jp = (n.transpose() * pp.eval(&(x - gp.barycenter)) * n)[(0, 0)];
                    let jm = (n.transpose() * pm.eval(&(x - gm.barycenter)) * n)[(0, 0)];
                    (jp - jm) * n.dot(&curl_v.eval(x))
                });
            }

            let v_i = crate::assembly::interpolate(&sp.v, &mut |x: &V3| {
                Value::Vector(v_field.eval(x))
            });
            let btau = b.matvec(&tau_h.coeffs);
            let rhs: f64 = btau.iter().zip(&v_i.coeffs).map(|(a, b)| a * b).sum();
            let scale = lhs.abs().max(rhs.abs()).max(1e-300);
            worst = worst.max((lhs - rhs).abs() / scale);
        }
        entries.push(CheckEntry::new(
            "adjoint identity trigonometric",
            worst,
            1e-9,
        ));
    }

    // --- skew-lift identity: B I_h^tn(mskw u_h) = -(curl u_h, curl .) for
    //     discretely divergence-free u_h.
    {
        let z = nullspace_of_transpose(&g.to_dense(), 1e-12).map_err(SolveError::Linalg)?;
        let mut worst = 0.0f64;
        for _ in 0..samples.min(8) {
            let y: Vec<f64> = (0..z.ncols()).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let mut u_coeffs = vec![0.0; sp.v.dim()];
            for (c, &yc) in y.iter().enumerate() {
                for r in 0..sp.v.dim() {
                    u_coeffs[r] += z[(r, c)] * yc;
                }
            }
            let u_h = FieldCoefficients::from_coeffs(sp.v.clone(), u_coeffs.clone());
            let sigma_m = interpolate_on_tets(&sp.sigma, &mut |t, x| {
                Value::Matrix(mskw(&u_h.eval(t, x).as_vector()))
            });
            let lhs = b.matvec(&sigma_m.coeffs);
            let rhs = s_curl.matvec(&u_coeffs);
            let scale = vnorm(&lhs).max(vnorm(&rhs)).max(1e-300);
            let diff: f64 = lhs
                .iter()
                .zip(&rhs)
                .map(|(a, b)| (a + b) * (a + b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(diff / scale);
        }
        entries.push(CheckEntry::new("skew lift identity", worst, 1e-10));
    }

    Ok(entries)
}

/// Assembles `v -> sum_T (w, curl v)_T` for a smooth vector field `w`
/// (the weak curl-div form of a globally smooth tensor, whose jump terms
/// vanish).
fn weak_curldiv_smooth(
    mesh: &Arc<TetMesh>,
    v_space: &Arc<FESpace>,
    w: &mut dyn FnMut(&V3) -> V3,
    degree: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; v_space.dim()];
    for t in 0..mesh.tets.len() {
        let geom = mesh.tet_geometry(t);
        let el = &v_space.elements[t];
        let curls: Vec<crate::poly::VecPoly3> = el
            .nodal
            .iter()
            .map(|s| match s {
                crate::elements::Shape::Vector(v) => v.curl(),
                _ => unreachable!(),
            })
            .collect();
        let rule = quadrature(Domain::Tet, degree.min(14)).unwrap();
        for (p, wq) in rule.points.iter().zip(&rule.weights) {
            let x = geom.point_from_lambda(p);
            let xi = x - el.center;
            let wv = w(&x);
            let scale = 6.0 * geom.volume * wq;
            for (a, c) in curls.iter().enumerate() {
                if let Some(r) = v_space.free_of_full[v_space.cell_dofs[t][a]] {
                    out[r] += scale * wv.dot(&c.eval(&xi));
                }
            }
        }
    }
    out
}

/// Discrete Poincaré constants per mesh: smallest eigenvalues of the
/// curl-curl and grad-curl pencils against the mass on the discretely
/// divergence-free subspace.
pub fn poincare_monitor(
    meshes: &[Arc<TetMesh>],
    k: usize,
    l: usize,
) -> Result<Vec<(f64, f64)>, SolveError> {
    let mut out = Vec::new();
    for mesh in meshes {
        let sp = complex_spaces(mesh, k, l)?;
        let g = assemble_grad_coupling(&sp.q, &sp.v)?;
        let z = if sp.q.dim() == 0 {
            DMatrix::identity(sp.v.dim(), sp.v.dim())
        } else {
            nullspace_of_transpose(&g.to_dense(), 1e-12).map_err(SolveError::Linalg)?
        };
        let m_v = assemble_mass(&sp.v);
        let s_curl = assemble_curlcurl(&sp.v);
        let project = |mat: &crate::linalg::SparseMatrix| {
            let mut mz = DMatrix::zeros(sp.v.dim(), z.ncols());
            for c in 0..z.ncols() {
                let col: Vec<f64> = (0..sp.v.dim()).map(|r| z[(r, c)]).collect();
                let mcol = mat.matvec(&col);
                for r in 0..sp.v.dim() {
                    mz[(r, c)] = mcol[r];
                }
            }
            z.transpose() * mz
        };
        let mz = project(&m_v);
        let sz = project(&s_curl);
        let lam_curl = smallest_generalized_eig(&sz, &mz).map_err(SolveError::Linalg)?;

        // grad-curl pencil: Z^T B M_S^-1 B^T Z against the mass.
        let b = assemble_b(&sp.sigma, &sp.v)?;
        let m_s = assemble_mass(&sp.sigma);
        let factor =
            Factorization::new(&m_s, &SolveOptions::default()).map_err(SolveError::Linalg)?;
        let mut bt_z = DMatrix::zeros(sp.sigma.dim(), z.ncols());
        for c in 0..z.ncols() {
            let col: Vec<f64> = (0..sp.v.dim()).map(|r| z[(r, c)]).collect();
            let btz = b.matvec_transpose(&col);
            for r in 0..sp.sigma.dim() {
                bt_z[(r, c)] = btz[r];
            }
        }
        let mut w = DMatrix::zeros(sp.sigma.dim(), z.ncols());
        for c in 0..z.ncols() {
            let rhs: Vec<f64> = (0..sp.sigma.dim()).map(|r| bt_z[(r, c)]).collect();
            let sol = factor.solve(&rhs).map_err(SolveError::Linalg)?;
            for r in 0..sp.sigma.dim() {
                w[(r, c)] = sol[r];
            }
        }
        let a2 = bt_z.transpose() * &w;
        let a2 = (&a2 + a2.transpose()) * 0.5;
        let lam_gradcurl = smallest_generalized_eig(&a2, &mz).map_err(SolveError::Linalg)?;
        out.push((lam_curl, lam_gradcurl));
    }
    Ok(out)
}

/// Two-sided ratio of `||(grad curl)_h v_h||` against the broken seminorm
/// `|curl v_h|_{1,h}` over random discrete fields; returns `(min, max)`.
pub fn norm_equivalence_monitor(
    mesh: &Arc<TetMesh>,
    k: usize,
    l: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64), SolveError> {
    let sp = complex_spaces(mesh, k, l)?;
    let b = assemble_b(&sp.sigma, &sp.v)?;
    let m_s = assemble_mass(&sp.sigma);
    let factor = Factorization::new(&m_s, &SolveOptions::default()).map_err(SolveError::Linalg)?;
    let mut rng = SplitMix64::new(seed);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for _ in 0..samples {
        let v: Vec<f64> = (0..sp.v.dim()).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let btv = b.matvec_transpose(&v);
        let w = factor.solve(&btv).map_err(SolveError::Linalg)?;
        let grad_curl_norm = btv
            .iter()
            .zip(&w)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .max(0.0)
            .sqrt();

        let field = FieldCoefficients::from_coeffs(sp.v.clone(), v);
        let mut broken_sq = 0.0;
        for t in 0..mesh.tets.len() {
            let geom = mesh.tet_geometry(t);
            let gc = field.local_vec(t).curl().grad();
            broken_sq += integrate_tet(&geom, 2 * k, |x| {
                gc.eval(&(x - geom.barycenter)).norm_squared()
            });
        }
        for f in 0..mesh.faces.len() {
            let frame = mesh.face_frame(f);
            let jump_sq = integrate_face(&frame, 2 * k, |x| {
                let mut jump = V3::zeros();
                for (slot, tt) in mesh.face_tets[f].iter().enumerate() {
                    if let Some(t) = tt {
                        let sgn = if slot == 0 { 1.0 } else { -1.0 };
                        let geom = mesh.tet_geometry(*t);
                        jump += field.local_vec(*t).curl().eval(&(x - geom.barycenter)) * sgn;
                    }
                }
                jump.norm_squared()
            });
            broken_sq += jump_sq / frame.diameter;
        }
        let ratio = grad_curl_norm / broken_sq.sqrt().max(1e-300);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok((lo, hi))
}
