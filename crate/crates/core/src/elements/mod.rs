//! Local shape-function spaces and degree-of-freedom functionals.
//!
//! Four families are provided: traceless tangential-normal continuous
//! tensors, Nédélec edge elements of first and second kind, Lagrange
//! elements, and tangential face multipliers. DoF functionals are stored as
//! quadrature recipes against global entity data (sorted-vertex frames,
//! lower-to-higher edge tangents), so the two tets sharing an entity
//! generate bit-identical functionals and no sign bookkeeping is needed
//! downstream.

mod lagrange;
mod multiplier;
mod nedelec;
mod traceless;

pub use lagrange::{lagrange_local, lagrange_vector_local};
pub use multiplier::{lambda_face_local, multiplier_fields, FaceMultiplier};
pub use nedelec::{nedelec_local, nedelec_matrix_local, post_curl_local};
pub use traceless::{bubble_basis, matpoly_rank, sigma_tn_local, tn_trace_norm, TracelessFrame};

use crate::mesh::{FaceFrame, TetGeometry, TetMesh, V3};
use crate::poly::{MatPoly3, Poly3, VecPoly3, M3};
use crate::polyquad::{quadrature, Domain};
use nalgebra::DMatrix;
use thiserror::Error;

/// Quadrature degree used when applying DoFs to non-polynomial fields.
/// Edge and face rules support it directly; cell moments cap at the tet
/// rule maximum (they only arise for interior DoFs of higher orders).
pub const INTERPOLATION_DEGREE: usize = 18;

#[derive(Debug, Error)]
pub enum ElementError {
    #[error("unsupported order for {family}: {detail}")]
    UnsupportedOrder { family: String, detail: String },
    #[error("singular Vandermonde for {family} (residual {residual:.3e}); orientation bug likely")]
    SingularVandermonde { family: String, residual: f64 },
    #[error("spanning set for {what} has rank {got}, expected {expected}")]
    SpanRankMismatch {
        what: String,
        got: usize,
        expected: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// Traceless tensors with tangential-normal continuity, degree `k >= 0`.
    SigmaTn { k: usize },
    /// Nédélec element of degree `k`, gradient degree `l+1` (`l = k-1` first
    /// kind, `l = k` second kind).
    Nedelec { k: usize, l: usize },
    /// Row-wise Nédélec second kind for matrix fields.
    NedelecMatrix { k: usize },
    Lagrange { m: usize },
    LagrangeVector { m: usize },
    /// Tangential face multiplier of the degree-`k` method.
    Multiplier { k: usize },
    /// Broken local space `P_k + x cross P_k` used by post-processing.
    PostCurl { k: usize },
}

impl Family {
    pub fn kind(&self) -> ValueKind {
        match self {
            Family::SigmaTn { .. } | Family::NedelecMatrix { .. } => ValueKind::Matrix,
            Family::Nedelec { .. }
            | Family::LagrangeVector { .. }
            | Family::Multiplier { .. }
            | Family::PostCurl { .. } => ValueKind::Vector,
            Family::Lagrange { .. } => ValueKind::Scalar,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueKind {
    Scalar,
    Vector,
    Matrix,
}

#[derive(Clone, Copy, Debug)]
pub enum Value {
    Scalar(f64),
    Vector(V3),
    Matrix(M3),
}

impl Value {
    pub fn pair(&self, other: &Value) -> f64 {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => a * b,
            (Value::Vector(a), Value::Vector(b)) => a.dot(b),
            (Value::Matrix(a), Value::Matrix(b)) => a.dot(b),
            _ => panic!("mismatched value kinds"),
        }
    }

    pub fn as_vector(&self) -> V3 {
        match self {
            Value::Vector(v) => *v,
            _ => panic!("expected vector value"),
        }
    }

    pub fn as_matrix(&self) -> M3 {
        match self {
            Value::Matrix(m) => *m,
            _ => panic!("expected matrix value"),
        }
    }

    pub fn as_scalar(&self) -> f64 {
        match self {
            Value::Scalar(s) => *s,
            _ => panic!("expected scalar value"),
        }
    }
}

/// Local polynomial in tet coordinates `xi = x - center`.
#[derive(Clone, Debug)]
pub enum Shape {
    Scalar(Poly3),
    Vector(VecPoly3),
    Matrix(MatPoly3),
}

impl Shape {
    pub fn kind(&self) -> ValueKind {
        match self {
            Shape::Scalar(_) => ValueKind::Scalar,
            Shape::Vector(_) => ValueKind::Vector,
            Shape::Matrix(_) => ValueKind::Matrix,
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            Shape::Scalar(p) => p.deg,
            Shape::Vector(v) => v.0.iter().map(|p| p.deg).max().unwrap(),
            Shape::Matrix(m) => m.0.iter().flatten().map(|p| p.deg).max().unwrap(),
        }
    }

    pub fn eval(&self, xi: &V3) -> Value {
        match self {
            Shape::Scalar(p) => Value::Scalar(p.eval(xi)),
            Shape::Vector(v) => Value::Vector(v.eval(xi)),
            Shape::Matrix(m) => Value::Matrix(m.eval(xi)),
        }
    }

    pub fn zero(kind: ValueKind) -> Shape {
        match kind {
            ValueKind::Scalar => Shape::Scalar(Poly3::zero(0)),
            ValueKind::Vector => Shape::Vector(VecPoly3::zero(0)),
            ValueKind::Matrix => Shape::Matrix(MatPoly3::zero(0)),
        }
    }

    pub fn add_scaled(&mut self, other: &Shape, s: f64) {
        match (self, other) {
            (Shape::Scalar(a), Shape::Scalar(b)) => a.add_scaled(b, s),
            (Shape::Vector(a), Shape::Vector(b)) => a.add_scaled(b, s),
            (Shape::Matrix(a), Shape::Matrix(b)) => a.add_scaled(b, s),
            _ => panic!("mismatched shape kinds"),
        }
    }
}

/// Local mesh entity a DoF is attached to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entity {
    Vertex(usize),
    Edge(usize),
    Face(usize),
    Cell,
}

/// Scalar polynomial on a face in (sorted-vertex) barycentric coordinates.
#[derive(Clone, Debug)]
pub struct FaceScalarPoly {
    pub exps: Vec<[usize; 3]>,
    pub coeffs: Vec<f64>,
}

impl FaceScalarPoly {
    pub fn eval(&self, l: &[f64; 3]) -> f64 {
        self.exps
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| c * l[0].powi(e[0] as i32) * l[1].powi(e[1] as i32) * l[2].powi(e[2] as i32))
            .sum()
    }

    pub fn degree(&self) -> usize {
        self.exps.iter().map(|e| e[0] + e[1] + e[2]).max().unwrap_or(0)
    }
}

/// Vector-coefficient polynomial on a face.
#[derive(Clone, Debug)]
pub struct FaceVecPoly {
    pub exps: Vec<[usize; 3]>,
    pub coeffs: Vec<V3>,
}

impl FaceVecPoly {
    pub fn eval(&self, l: &[f64; 3]) -> V3 {
        let mut acc = V3::zeros();
        for (e, c) in self.exps.iter().zip(&self.coeffs) {
            acc += c * (l[0].powi(e[0] as i32) * l[1].powi(e[1] as i32) * l[2].powi(e[2] as i32));
        }
        acc
    }

    pub fn degree(&self) -> usize {
        self.exps.iter().map(|e| e[0] + e[1] + e[2]).max().unwrap_or(0)
    }

    pub fn add_scaled(&mut self, other: &FaceVecPoly, s: f64) {
        for (e, c) in other.exps.iter().zip(&other.coeffs) {
            if let Some(idx) = self.exps.iter().position(|x| x == e) {
                self.coeffs[idx] += c * s;
            } else {
                self.exps.push(*e);
                self.coeffs.push(c * s);
            }
        }
    }
}

/// Quadrature recipe of one DoF functional. All normalizations (entity
/// measure) are baked in so that the functional is scale-balanced.
#[derive(Clone, Debug)]
pub enum DofSpec {
    /// Point evaluation of a scalar field.
    PointEval { point: V3 },
    /// `1/|e| int_e (v . t) q ds`, `t` the unit tangent from `a` to `b`
    /// (lower to higher global vertex id), `q` in edge barycentric
    /// coordinates `(l_a, l_b)`.
    EdgeMoment { a: V3, b: V3, q: Vec<([usize; 2], f64)> },
    /// `1/|F| int_F v . q dS` with a tangential test field `q`.
    FaceVecMoment { frame: FaceFrame, q: FaceVecPoly },
    /// `1/|F| int_F (t_dir^T tau n_F) q dS`, stored as the Frobenius pairing
    /// against `dir = t_dir (x) n_F`.
    FaceTnMoment {
        frame: FaceFrame,
        dir: M3,
        q: FaceScalarPoly,
    },
    /// `1/|T| int_T <field, test> dx` over the owning tet.
    CellMoment { test: Shape },
    /// Applies `inner` to the given row of a matrix field.
    RowLift { row: usize, inner: Box<DofSpec> },
}

#[derive(Clone, Debug)]
pub struct Dof {
    pub entity: Entity,
    pub index_on_entity: usize,
    pub spec: DofSpec,
}

impl Dof {
    /// Applies the functional to an arbitrary field with quadrature of the
    /// requested degree (ignored by point evaluations).
    pub fn apply(&self, geom: &TetGeometry, degree: usize, f: &mut dyn FnMut(&V3) -> Value) -> f64 {
        apply_spec(&self.spec, geom, degree, f)
    }

    /// Applies the functional to a local polynomial shape exactly.
    pub fn apply_shape(&self, geom: &TetGeometry, center: &V3, shape: &Shape) -> f64 {
        let degree = spec_degree(&self.spec) + shape.degree();
        let mut f = |x: &V3| shape.eval(&(x - center));
        apply_spec(&self.spec, geom, degree, &mut f)
    }
}

fn spec_degree(spec: &DofSpec) -> usize {
    match spec {
        DofSpec::PointEval { .. } => 0,
        DofSpec::EdgeMoment { q, .. } => q.iter().map(|(e, _)| e[0] + e[1]).max().unwrap_or(0),
        DofSpec::FaceVecMoment { q, .. } => q.degree(),
        DofSpec::FaceTnMoment { q, .. } => q.degree(),
        DofSpec::CellMoment { test } => test.degree(),
        DofSpec::RowLift { inner, .. } => spec_degree(inner),
    }
}

fn apply_spec(
    spec: &DofSpec,
    geom: &TetGeometry,
    degree: usize,
    f: &mut dyn FnMut(&V3) -> Value,
) -> f64 {
    match spec {
        DofSpec::PointEval { point } => f(point).as_scalar(),
        DofSpec::EdgeMoment { a, b, q } => {
            let rule = quadrature(Domain::Edge, degree.min(Domain::Edge.max_degree()))
                .expect("edge rule");
            let t = (b - a).normalize();
            let mut acc = 0.0;
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let x = a * p[0] + b * p[1];
                let qv: f64 = q
                    .iter()
                    .map(|(e, c)| c * p[0].powi(e[0] as i32) * p[1].powi(e[1] as i32))
                    .sum();
                acc += w * f(&x).as_vector().dot(&t) * qv;
            }
            acc
        }
        DofSpec::FaceVecMoment { frame, q } => {
            let rule = quadrature(Domain::Tri, degree.min(Domain::Tri.max_degree()))
                .expect("tri rule");
            let mut acc = 0.0;
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let l = [p[0], p[1], p[2]];
                let x = frame.point_from_lambda(&l);
                acc += w * f(&x).as_vector().dot(&q.eval(&l));
            }
            // weights sum to 1/2 = |F|/(2A); normalize to mean moments.
            2.0 * acc
        }
        DofSpec::FaceTnMoment { frame, dir, q } => {
            let rule = quadrature(Domain::Tri, degree.min(Domain::Tri.max_degree()))
                .expect("tri rule");
            let mut acc = 0.0;
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let l = [p[0], p[1], p[2]];
                let x = frame.point_from_lambda(&l);
                acc += w * f(&x).as_matrix().dot(dir) * q.eval(&l);
            }
            2.0 * acc
        }
        DofSpec::CellMoment { test } => {
            let rule = quadrature(Domain::Tet, degree.min(Domain::Tet.max_degree()))
                .expect("tet rule");
            let mut acc = 0.0;
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let x = geom.point_from_lambda(p);
                let xi = x - geom.barycenter;
                acc += w * f(&x).pair(&test.eval(&xi));
            }
            6.0 * acc
        }
        DofSpec::RowLift { row, inner } => {
            let r = *row;
            let mut g = |x: &V3| -> Value {
                let m = f(x).as_matrix();
                Value::Vector(V3::new(m[(r, 0)], m[(r, 1)], m[(r, 2)]))
            };
            apply_spec(inner, geom, degree, &mut g)
        }
    }
}

/// Global entity data of one tet, shared by all element constructors.
#[derive(Clone, Debug)]
pub struct TetEntities {
    pub geom: TetGeometry,
    /// Per local edge: endpoint coordinates ordered by global vertex id.
    pub edges: [(V3, V3); 6],
    /// Per local face: frame of the global (sorted-triple) face.
    pub faces: [FaceFrame; 4],
}

impl TetEntities {
    pub fn from_mesh(mesh: &TetMesh, t: usize) -> Self {
        let geom = mesh.tet_geometry(t);
        let edges = std::array::from_fn(|ke| {
            let e = mesh.tet_edges[t][ke];
            (mesh.vertex(mesh.edges[e][0]), mesh.vertex(mesh.edges[e][1]))
        });
        let faces = std::array::from_fn(|kf| mesh.face_frame(mesh.tet_faces[t][kf]));
        Self { geom, edges, faces }
    }

    /// Standalone tet: local vertex indices play the role of global ids.
    pub fn from_verts(verts: [V3; 4]) -> Self {
        let geom = TetGeometry::new(verts);
        let edges = std::array::from_fn(|ke| {
            let [i, j] = crate::mesh::LOCAL_EDGES[ke];
            (verts[i], verts[j])
        });
        let faces = std::array::from_fn(|kf| {
            let f = crate::mesh::LOCAL_FACES[kf];
            FaceFrame::new([verts[f[0]], verts[f[1]], verts[f[2]]])
        });
        Self { geom, edges, faces }
    }
}

/// A constructed local element: DoFs, a spanning shape basis, and the nodal
/// (dual) basis obtained by inverting the DoF-by-shape Vandermonde.
#[derive(Clone, Debug)]
pub struct LocalElement {
    pub family: Family,
    pub center: V3,
    pub dofs: Vec<Dof>,
    pub shapes: Vec<Shape>,
    pub nodal: Vec<Shape>,
}

impl LocalElement {
    pub fn dim(&self) -> usize {
        self.dofs.len()
    }

    /// DoF-by-shape Vandermonde (row = DoF, column = shape).
    pub fn vandermonde(&self, geom: &TetGeometry) -> DMatrix<f64> {
        let n = self.dofs.len();
        let mut v = DMatrix::zeros(n, self.shapes.len());
        for (i, dof) in self.dofs.iter().enumerate() {
            for (j, shape) in self.shapes.iter().enumerate() {
                v[(i, j)] = dof.apply_shape(geom, &self.center, shape);
            }
        }
        v
    }

    pub fn vandermonde_condition(&self, geom: &TetGeometry) -> f64 {
        let v = self.vandermonde(geom);
        let svd = v.svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        smax / smin
    }
}

/// Inverts the Vandermonde and returns the nodal basis.
pub(crate) fn build_nodal(
    family: Family,
    geom: &TetGeometry,
    center: &V3,
    dofs: &[Dof],
    shapes: &[Shape],
) -> Result<Vec<Shape>, ElementError> {
    let n = dofs.len();
    assert_eq!(
        n,
        shapes.len(),
        "{family:?}: DoF count {} != shape dimension {}",
        n,
        shapes.len()
    );
    let mut v = DMatrix::zeros(n, n);
    for (i, dof) in dofs.iter().enumerate() {
        for (j, shape) in shapes.iter().enumerate() {
            v[(i, j)] = dof.apply_shape(geom, center, shape);
        }
    }
    let lu = v.clone().lu();
    let inv = lu.try_inverse().ok_or(ElementError::SingularVandermonde {
        family: format!("{family:?}"),
        residual: f64::INFINITY,
    })?;
    let resid = (&v * &inv - DMatrix::<f64>::identity(n, n)).abs().max();
    if !(resid < 1e-6) {
        return Err(ElementError::SingularVandermonde {
            family: format!("{family:?}"),
            residual: resid,
        });
    }
    // nodal_j = sum_s inv[s, j] shape_s satisfies dof_i(nodal_j) = delta_ij.
    let kind = shapes[0].kind();
    let mut nodal = Vec::with_capacity(n);
    for j in 0..n {
        let mut f = Shape::zero(kind);
        for s in 0..n {
            let c = inv[(s, j)];
            if c != 0.0 {
                f.add_scaled(&shapes[s], c);
            }
        }
        nodal.push(f);
    }
    Ok(nodal)
}

/// Deterministic symmetric eigendecomposition sorted by descending
/// eigenvalue (index tie-break).
pub(crate) fn sym_eig_sorted(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        vecs.set_column(new, &eig.eigenvectors.column(old));
    }
    (vals, vecs)
}

/// Reduces a spanning set of shapes to an independent basis by a Gram
/// eigen-decomposition (rank-revealing, relative tolerance 1e-12 on the
/// Gram spectrum).
pub fn orthonormalize_shapes(
    what: &str,
    spanning: Vec<Shape>,
    gram: impl Fn(&Shape, &Shape) -> f64,
    expected: Option<usize>,
) -> Result<Vec<Shape>, ElementError> {
    let n = spanning.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = gram(&spanning[i], &spanning[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let (vals, vecs) = sym_eig_sorted(g);
    let vmax = vals[0].max(0.0);
    let kind = spanning[0].kind();
    let mut out = Vec::new();
    for (idx, &lam) in vals.iter().enumerate() {
        if lam > 1e-12 * vmax {
            let scale = 1.0 / lam.sqrt();
            let mut f = Shape::zero(kind);
            for s in 0..n {
                let c = vecs[(s, idx)] * scale;
                if c != 0.0 {
                    f.add_scaled(&spanning[s], c);
                }
            }
            out.push(f);
        }
    }
    if let Some(e) = expected {
        if out.len() != e {
            return Err(ElementError::SpanRankMismatch {
                what: what.to_string(),
                got: out.len(),
                expected: e,
            });
        }
    }
    Ok(out)
}

/// Builds the element of a family on one tet.
pub fn build_element(family: Family, ents: &TetEntities) -> Result<LocalElement, ElementError> {
    match family {
        Family::SigmaTn { k } => sigma_tn_local(k, ents),
        Family::Nedelec { k, l } => nedelec_local(k, l, ents),
        Family::NedelecMatrix { k } => nedelec_matrix_local(k, ents),
        Family::Lagrange { m } => lagrange_local(m, ents),
        Family::LagrangeVector { m } => lagrange_vector_local(m, ents),
        Family::PostCurl { k } => post_curl_local(k, ents),
        Family::Multiplier { .. } => Err(ElementError::UnsupportedOrder {
            family: format!("{family:?}"),
            detail: "multiplier elements are attached to faces, not tets".into(),
        }),
    }
}

/// Lifts a vector-valued element to a matrix-valued one, row by row.
pub(crate) fn lift_rows(family: Family, el: LocalElement) -> LocalElement {
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
    let lift_shape = |s: &Shape, r: usize| -> Shape {
        let v = match s {
            Shape::Vector(v) => v,
            _ => panic!("row lift expects vector shapes"),
        };
        let mut m = MatPoly3::zero(0);
        m.set_row(r, v.clone());
        Shape::Matrix(m)
    };
    let mut shapes = Vec::with_capacity(3 * el.shapes.len());
    let mut nodal = Vec::with_capacity(3 * el.nodal.len());
    for i in 0..el.shapes.len() {
        for r in 0..3 {
            shapes.push(lift_shape(&el.shapes[i], r));
            nodal.push(lift_shape(&el.nodal[i], r));
        }
    }
    LocalElement {
        family,
        center: el.center,
        dofs,
        shapes,
        nodal,
    }
}
