//! Tetrahedral meshes of the unit cube: construction, perturbation, uniform
//! red refinement, oriented entity tables and combinatorial invariants.
//!
//! Orientation conventions (the single source of truth for all sign matching
//! downstream):
//! - edges store their endpoints with ascending vertex id; the global tangent
//!   points from the lower to the higher id,
//! - faces store their vertices sorted ascending; the global normal `n_F`
//!   follows the right-hand rule on the sorted triple,
//! - every tet stores its vertices so that the signed volume is positive.

use crate::rng::SplitMix64;
use nalgebra::Vector3;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use thiserror::Error;

pub type V3 = Vector3<f64>;

/// Local edges of a tet in canonical order.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
/// Local face `i` is opposite local vertex `i`.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntityCounts {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub tets: usize,
    pub interior_vertices: usize,
    pub interior_edges: usize,
    pub interior_faces: usize,
}

impl EntityCounts {
    /// `|V| - |E| + |F| - |T|`, equal to 1 on contractible domains.
    pub fn euler_full(&self) -> i64 {
        self.vertices as i64 - self.edges as i64 + self.faces as i64 - self.tets as i64
    }

    /// `|V̊| - |E̊| + |F̊| - |T|`, equal to -1 on contractible domains.
    pub fn euler_interior(&self) -> i64 {
        self.interior_vertices as i64 - self.interior_edges as i64 + self.interior_faces as i64
            - self.tets as i64
    }
}

/// Immutable tetrahedral mesh with derived oriented entity tables.
#[derive(Clone, Debug)]
pub struct TetMesh {
    pub vertices: Vec<[f64; 3]>,
    pub tets: Vec<[usize; 4]>,
    /// Sorted vertex pairs, lexicographically ordered.
    pub edges: Vec<[usize; 2]>,
    /// Sorted vertex triples, lexicographically ordered.
    pub faces: Vec<[usize; 3]>,
    /// Global edge index of each local edge (order of [`LOCAL_EDGES`]).
    pub tet_edges: Vec<[usize; 6]>,
    /// +1 when the local edge direction agrees with the global tangent.
    pub tet_edge_sign: Vec<[i8; 6]>,
    /// Global face index of each local face (order of [`LOCAL_FACES`]).
    pub tet_faces: Vec<[usize; 4]>,
    /// +1 when the outward normal of the tet on that face equals `n_F`.
    pub tet_face_sign: Vec<[i8; 4]>,
    /// Incident tets per face: `[plus side, minus side]` by outward normal.
    pub face_tets: Vec<[Option<usize>; 2]>,
    pub vertex_boundary: Vec<bool>,
    pub edge_boundary: Vec<bool>,
    pub face_boundary: Vec<bool>,
    /// Tets incident to each vertex, ascending.
    pub vertex_tets: Vec<Vec<usize>>,
    /// Tets incident to each edge, ascending.
    pub edge_tets: Vec<Vec<usize>>,
}

/// Per-tet geometric data shared by element construction and assembly.
#[derive(Clone, Debug)]
pub struct TetGeometry {
    pub verts: [V3; 4],
    pub volume: f64,
    /// Barycentric gradients; `grad_lambda[i]` is constant on the tet.
    pub grad_lambda: [V3; 4],
    pub barycenter: V3,
    /// Diameter (longest edge).
    pub diameter: f64,
}

impl TetGeometry {
    pub fn new(verts: [V3; 4]) -> Self {
        let j = nalgebra::Matrix3::from_columns(&[
            verts[1] - verts[0],
            verts[2] - verts[0],
            verts[3] - verts[0],
        ]);
        let det = j.determinant();
        let volume = det / 6.0;
        let jinv = j.try_inverse().expect("non-degenerate tet");
        let g1 = V3::new(jinv[(0, 0)], jinv[(0, 1)], jinv[(0, 2)]);
        let g2 = V3::new(jinv[(1, 0)], jinv[(1, 1)], jinv[(1, 2)]);
        let g3 = V3::new(jinv[(2, 0)], jinv[(2, 1)], jinv[(2, 2)]);
        let g0 = -(g1 + g2 + g3);
        let mut diameter = 0.0f64;
        for e in LOCAL_EDGES {
            diameter = diameter.max((verts[e[1]] - verts[e[0]]).norm());
        }
        let barycenter = (verts[0] + verts[1] + verts[2] + verts[3]) / 4.0;
        Self {
            verts,
            volume,
            grad_lambda: [g0, g1, g2, g3],
            barycenter,
            diameter,
        }
    }

    /// Edge vector from local vertex `i` to local vertex `j`.
    pub fn edge_vector(&self, i: usize, j: usize) -> V3 {
        self.verts[j] - self.verts[i]
    }

    pub fn lambda(&self, p: &V3) -> [f64; 4] {
        let mut l = [0.0; 4];
        for i in 0..4 {
            l[i] = 0.25 + self.grad_lambda[i].dot(&(p - self.barycenter));
        }
        l
    }

    pub fn point_from_lambda(&self, l: &[f64; 4]) -> V3 {
        self.verts[0] * l[0] + self.verts[1] * l[1] + self.verts[2] * l[2] + self.verts[3] * l[3]
    }

    pub fn inradius(&self) -> f64 {
        let mut area = 0.0;
        for f in LOCAL_FACES {
            let a = self.verts[f[1]] - self.verts[f[0]];
            let b = self.verts[f[2]] - self.verts[f[0]];
            area += 0.5 * a.cross(&b).norm();
        }
        3.0 * self.volume / area
    }
}

/// Oriented frame of a global face: `t1` along the first sorted edge,
/// `n` by the right-hand rule on the sorted triple, `t2 = n × t1`.
#[derive(Clone, Debug)]
pub struct FaceFrame {
    pub verts: [V3; 3],
    pub t1: V3,
    pub t2: V3,
    pub normal: V3,
    pub area: f64,
    pub diameter: f64,
    pub barycenter: V3,
}

impl FaceFrame {
    pub fn new(verts: [V3; 3]) -> Self {
        let e1 = verts[1] - verts[0];
        let e2 = verts[2] - verts[0];
        let nvec = e1.cross(&e2);
        let area = 0.5 * nvec.norm();
        let normal = nvec.normalize();
        let t1 = e1.normalize();
        let t2 = normal.cross(&t1);
        let diameter = e1
            .norm()
            .max(e2.norm())
            .max((verts[2] - verts[1]).norm());
        let barycenter = (verts[0] + verts[1] + verts[2]) / 3.0;
        Self {
            verts,
            t1,
            t2,
            normal,
            area,
            diameter,
            barycenter,
        }
    }

    pub fn point_from_lambda(&self, l: &[f64; 3]) -> V3 {
        self.verts[0] * l[0] + self.verts[1] * l[1] + self.verts[2] * l[2]
    }

    /// In-plane gradients of the three face barycentric coordinates.
    pub fn grad_lambda(&self) -> [V3; 3] {
        let two_a = 2.0 * self.area;
        let e0 = self.verts[2] - self.verts[1];
        let e1 = self.verts[0] - self.verts[2];
        let e2 = self.verts[1] - self.verts[0];
        [
            self.normal.cross(&e0) / two_a,
            self.normal.cross(&e1) / two_a,
            self.normal.cross(&e2) / two_a,
        ]
    }
}

fn signed_volume(v: &[[f64; 3]], t: &[usize; 4]) -> f64 {
    let p = |i: usize| V3::new(v[t[i]][0], v[t[i]][1], v[t[i]][2]);
    let a = p(1) - p(0);
    let b = p(2) - p(0);
    let c = p(3) - p(0);
    a.cross(&b).dot(&c) / 6.0
}

impl TetMesh {
    /// Builds the full derived structure from vertices and tets.
    ///
    /// Every tet must already be positively oriented.
    pub fn from_parts(vertices: Vec<[f64; 3]>, tets: Vec<[usize; 4]>) -> Result<Self, MeshError> {
        let nv = vertices.len();
        for (t, tet) in tets.iter().enumerate() {
            for &v in tet {
                if v >= nv {
                    return Err(MeshError::InvalidArgument(format!(
                        "tet {t} references vertex {v} out of {nv}"
                    )));
                }
            }
            let vol = signed_volume(&vertices, tet);
            if !(vol > 0.0) {
                return Err(MeshError::DegenerateMesh(format!(
                    "tet {t} has non-positive volume {vol:.3e}"
                )));
            }
        }

        let mut edge_ids: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        let mut face_ids: BTreeMap<[usize; 3], usize> = BTreeMap::new();
        for tet in &tets {
            for le in LOCAL_EDGES {
                let mut e = [tet[le[0]], tet[le[1]]];
                e.sort_unstable();
                edge_ids.entry(e).or_insert(0);
            }
            for lf in LOCAL_FACES {
                let mut f = [tet[lf[0]], tet[lf[1]], tet[lf[2]]];
                f.sort_unstable();
                face_ids.entry(f).or_insert(0);
            }
        }
        // BTreeMap iteration is sorted: assign canonical lexicographic ids.
        for (i, (_, id)) in edge_ids.iter_mut().enumerate() {
            *id = i;
        }
        for (i, (_, id)) in face_ids.iter_mut().enumerate() {
            *id = i;
        }
        let edges: Vec<[usize; 2]> = edge_ids.keys().copied().collect();
        let faces: Vec<[usize; 3]> = face_ids.keys().copied().collect();

        let mut tet_edges = Vec::with_capacity(tets.len());
        let mut tet_edge_sign = Vec::with_capacity(tets.len());
        let mut tet_faces = Vec::with_capacity(tets.len());
        let mut tet_face_sign = Vec::with_capacity(tets.len());
        let mut face_tets: Vec<[Option<usize>; 2]> = vec![[None, None]; faces.len()];

        for (t, tet) in tets.iter().enumerate() {
            let mut te = [0usize; 6];
            let mut ts = [0i8; 6];
            for (k, le) in LOCAL_EDGES.iter().enumerate() {
                let (a, b) = (tet[le[0]], tet[le[1]]);
                let key = [a.min(b), a.max(b)];
                te[k] = edge_ids[&key];
                ts[k] = if a < b { 1 } else { -1 };
            }
            tet_edges.push(te);
            tet_edge_sign.push(ts);

            let mut tf = [0usize; 4];
            let mut fs = [0i8; 4];
            for (k, lf) in LOCAL_FACES.iter().enumerate() {
                let mut f = [tet[lf[0]], tet[lf[1]], tet[lf[2]]];
                f.sort_unstable();
                let fid = face_ids[&f];
                tf[k] = fid;
                let p = |i: usize| V3::new(vertices[i][0], vertices[i][1], vertices[i][2]);
                let n = (p(f[1]) - p(f[0])).cross(&(p(f[2]) - p(f[0])));
                // Outward direction on face k points away from the opposite vertex.
                let outward = p(f[0]) - p(tet[k]);
                let s = n.dot(&outward);
                if s == 0.0 {
                    return Err(MeshError::DegenerateMesh(format!(
                        "tet {t} face {k} has ambiguous orientation"
                    )));
                }
                fs[k] = if s > 0.0 { 1 } else { -1 };
                let slot = if fs[k] > 0 { 0 } else { 1 };
                if face_tets[fid][slot].is_some() {
                    return Err(MeshError::DegenerateMesh(format!(
                        "face {fid} has two tets on the same side"
                    )));
                }
                face_tets[fid][slot] = Some(t);
            }
            tet_faces.push(tf);
            tet_face_sign.push(fs);
        }

        let mut face_boundary = vec![false; faces.len()];
        for (f, inc) in face_tets.iter().enumerate() {
            let cnt = inc.iter().flatten().count();
            match cnt {
                1 => face_boundary[f] = true,
                2 => {}
                _ => {
                    return Err(MeshError::DegenerateMesh(format!(
                        "face {f} incident to {cnt} tets"
                    )))
                }
            }
        }
        let mut vertex_boundary = vec![false; nv];
        let mut edge_boundary = vec![false; edges.len()];
        for (f, tri) in faces.iter().enumerate() {
            if face_boundary[f] {
                for &v in tri {
                    vertex_boundary[v] = true;
                }
                for pair in [[tri[0], tri[1]], [tri[0], tri[2]], [tri[1], tri[2]]] {
                    edge_boundary[edge_ids[&pair]] = true;
                }
            }
        }

        let mut vertex_tets = vec![Vec::new(); nv];
        let mut edge_tets = vec![Vec::new(); edges.len()];
        for (t, tet) in tets.iter().enumerate() {
            for &v in tet {
                vertex_tets[v].push(t);
            }
            for e in &tet_edges[t] {
                edge_tets[*e].push(t);
            }
        }

        Ok(Self {
            vertices,
            tets,
            edges,
            faces,
            tet_edges,
            tet_edge_sign,
            tet_faces,
            tet_face_sign,
            face_tets,
            vertex_boundary,
            edge_boundary,
            face_boundary,
            vertex_tets,
            edge_tets,
        })
    }

    /// Freudenthal (6-tet Kuhn) mesh of the unit cube with `n` subdivisions
    /// per axis.
    pub fn build_cube_mesh(n: usize) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::InvalidArgument(
                "subdivision count must be at least 1".into(),
            ));
        }
        let np = n + 1;
        let vid = |i: usize, j: usize, k: usize| i + np * (j + np * k);
        let mut vertices = Vec::with_capacity(np * np * np);
        for k in 0..np {
            for j in 0..np {
                for i in 0..np {
                    vertices.push([i as f64 / n as f64, j as f64 / n as f64, k as f64 / n as f64]);
                }
            }
        }
        // All six axis permutations; each path shares the main cube diagonal.
        const PERMS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut tets = Vec::with_capacity(6 * n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for perm in PERMS {
                        let mut c = [i, j, k];
                        let v0 = vid(c[0], c[1], c[2]);
                        c[perm[0]] += 1;
                        let v1 = vid(c[0], c[1], c[2]);
                        c[perm[1]] += 1;
                        let v2 = vid(c[0], c[1], c[2]);
                        c[perm[2]] += 1;
                        let v3 = vid(c[0], c[1], c[2]);
                        let mut tet = [v0, v1, v2, v3];
                        if signed_volume(&vertices, &tet) < 0.0 {
                            tet.swap(1, 2);
                        }
                        tets.push(tet);
                    }
                }
            }
        }
        Self::from_parts(vertices, tets)
    }

    pub fn tet_geometry(&self, t: usize) -> TetGeometry {
        let p = |i: usize| V3::from_column_slice(&self.vertices[self.tets[t][i]]);
        TetGeometry::new([p(0), p(1), p(2), p(3)])
    }

    pub fn face_frame(&self, f: usize) -> FaceFrame {
        let p = |i: usize| V3::from_column_slice(&self.vertices[self.faces[f][i]]);
        FaceFrame::new([p(0), p(1), p(2)])
    }

    pub fn vertex(&self, v: usize) -> V3 {
        V3::from_column_slice(&self.vertices[v])
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        (self.vertex(self.edges[e][1]) - self.vertex(self.edges[e][0])).norm()
    }

    /// Unit tangent from the lower to the higher vertex id.
    pub fn edge_tangent(&self, e: usize) -> V3 {
        (self.vertex(self.edges[e][1]) - self.vertex(self.edges[e][0])).normalize()
    }

    /// Maximum tet diameter.
    pub fn mesh_size(&self) -> f64 {
        (0..self.tets.len())
            .map(|t| self.tet_geometry(t).diameter)
            .fold(0.0, f64::max)
    }

    pub fn entity_counts(&self) -> EntityCounts {
        let b = |flags: &[bool]| flags.iter().filter(|&&x| x).count();
        EntityCounts {
            vertices: self.vertices.len(),
            edges: self.edges.len(),
            faces: self.faces.len(),
            tets: self.tets.len(),
            interior_vertices: self.vertices.len() - b(&self.vertex_boundary),
            interior_edges: self.edges.len() - b(&self.edge_boundary),
            interior_faces: self.faces.len() - b(&self.face_boundary),
        }
    }

    /// Maximum over tets of diameter / inradius.
    pub fn shape_regularity(&self) -> f64 {
        (0..self.tets.len())
            .map(|t| {
                let g = self.tet_geometry(t);
                g.diameter / g.inradius()
            })
            .fold(0.0, f64::max)
    }

    /// Moves interior vertices by independent uniform offsets in
    /// `[-a*h_loc, a*h_loc]^3`, `h_loc` the shortest incident edge.
    ///
    /// Offending vertices are resampled up to 100 times until every incident
    /// tet keeps positive volume. Connectivity tables are reused unchanged.
    pub fn perturb(&self, amplitude: f64, seed: u64) -> Result<Self, MeshError> {
        if !(0.0..0.5).contains(&amplitude) {
            return Err(MeshError::InvalidArgument(format!(
                "perturbation amplitude {amplitude} outside [0, 0.5)"
            )));
        }
        let mut rng = SplitMix64::new(seed);
        let mut vertices = self.vertices.clone();

        // Shortest incident edge per vertex, from the unperturbed mesh.
        let mut h_loc = vec![f64::INFINITY; vertices.len()];
        for (e, pair) in self.edges.iter().enumerate() {
            let len = self.edge_length(e);
            for &v in pair {
                h_loc[v] = h_loc[v].min(len);
            }
        }

        for v in 0..vertices.len() {
            if self.vertex_boundary[v] {
                continue;
            }
            let base = self.vertices[v];
            let amp = amplitude * h_loc[v];
            let mut placed = false;
            for _ in 0..100 {
                let cand = [
                    base[0] + rng.uniform(-amp, amp),
                    base[1] + rng.uniform(-amp, amp),
                    base[2] + rng.uniform(-amp, amp),
                ];
                vertices[v] = cand;
                let ok = self.vertex_tets[v]
                    .iter()
                    .all(|&t| signed_volume(&vertices, &self.tets[t]) > 0.0);
                if ok {
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(MeshError::DegenerateMesh(format!(
                    "vertex {v} could not be perturbed within 100 retries"
                )));
            }
        }
        for (t, tet) in self.tets.iter().enumerate() {
            if signed_volume(&vertices, tet) <= 0.0 {
                return Err(MeshError::DegenerateMesh(format!(
                    "tet {t} lost positive volume after perturbation"
                )));
            }
        }

        // Incidence is untouched; only coordinates change.
        let mut out = self.clone();
        out.vertices = vertices;
        Ok(out)
    }

    /// Red refinement: each tet splits into 4 corner tets plus 4 from the
    /// interior octahedron, cut along its shortest diagonal
    /// (ties broken by the lowest midpoint-id pair).
    pub fn refine_uniform(&self) -> Result<Self, MeshError> {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        for e in &self.edges {
            let a = self.vertices[e[0]];
            let b = self.vertices[e[1]];
            vertices.push([
                0.5 * (a[0] + b[0]),
                0.5 * (a[1] + b[1]),
                0.5 * (a[2] + b[2]),
            ]);
        }
        let mid = |mesh: &Self, t: usize, i: usize, j: usize| -> usize {
            let k = LOCAL_EDGES
                .iter()
                .position(|e| (e[0] == i && e[1] == j) || (e[0] == j && e[1] == i))
                .unwrap();
            nv + mesh.tet_edges[t][k]
        };

        let mut tets = Vec::with_capacity(8 * self.tets.len());
        for (t, tet) in self.tets.iter().enumerate() {
            let m01 = mid(self, t, 0, 1);
            let m02 = mid(self, t, 0, 2);
            let m03 = mid(self, t, 0, 3);
            let m12 = mid(self, t, 1, 2);
            let m13 = mid(self, t, 1, 3);
            let m23 = mid(self, t, 2, 3);
            let mut push = |mut child: [usize; 4]| {
                if signed_volume(&vertices, &child) < 0.0 {
                    child.swap(2, 3);
                }
                tets.push(child);
            };
            push([tet[0], m01, m02, m03]);
            push([tet[1], m01, m12, m13]);
            push([tet[2], m02, m12, m23]);
            push([tet[3], m03, m13, m23]);

            // The three candidate diagonals of the interior octahedron.
            let cands = [[m01, m23], [m02, m13], [m03, m12]];
            let dist = |a: usize, b: usize| {
                let pa = vertices[a];
                let pb = vertices[b];
                ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2))
                    .sqrt()
            };
            let mut best = 0usize;
            for c in 1..3 {
                let (da, db) = (dist(cands[c][0], cands[c][1]), dist(cands[best][0], cands[best][1]));
                let tol = 1e-12 * (da + db);
                if da < db - tol {
                    best = c;
                } else if (da - db).abs() <= tol {
                    let key = |d: [usize; 2]| [d[0].min(d[1]), d[0].max(d[1])];
                    if key(cands[c]) < key(cands[best]) {
                        best = c;
                    }
                }
            }
            let [d1, d2] = cands[best];
            // Equatorial cycle of the remaining four midpoints.
            let ring: [usize; 4] = match best {
                0 => [m02, m03, m13, m12],
                1 => [m01, m03, m23, m12],
                _ => [m01, m02, m23, m13],
            };
            for r in 0..4 {
                push([d1, d2, ring[r], ring[(r + 1) % 4]]);
            }
        }
        Self::from_parts(vertices, tets)
    }

    pub fn write_ascii<W: Write>(&self, w: &mut W) -> Result<(), MeshError> {
        writeln!(
            w,
            "{} {} {} {}",
            self.vertices.len(),
            self.edges.len(),
            self.faces.len(),
            self.tets.len()
        )?;
        for v in &self.vertices {
            writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
        }
        for t in &self.tets {
            writeln!(w, "{} {} {} {}", t[0], t[1], t[2], t[3])?;
        }
        Ok(())
    }

    pub fn read_ascii<R: BufRead>(r: &mut R) -> Result<Self, MeshError> {
        let mut lines = r.lines();
        let mut next_line = || -> Result<String, MeshError> {
            loop {
                match lines.next() {
                    Some(Ok(l)) => {
                        if !l.trim().is_empty() {
                            return Ok(l);
                        }
                    }
                    Some(Err(e)) => return Err(MeshError::Io(e)),
                    None => return Err(MeshError::Parse("unexpected end of file".into())),
                }
            }
        };
        let header = next_line()?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|e| MeshError::Parse(e.to_string())))
            .collect::<Result<_, _>>()?;
        if counts.len() != 4 {
            return Err(MeshError::Parse("header must be `nv ne nf nt`".into()));
        }
        let (nv, nt) = (counts[0], counts[3]);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let l = next_line()?;
            let xs: Vec<f64> = l
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|e| MeshError::Parse(e.to_string())))
                .collect::<Result<_, _>>()?;
            if xs.len() != 3 {
                return Err(MeshError::Parse(format!("bad vertex line `{l}`")));
            }
            vertices.push([xs[0], xs[1], xs[2]]);
        }
        let mut tets = Vec::with_capacity(nt);
        for _ in 0..nt {
            let l = next_line()?;
            let vs: Vec<usize> = l
                .split_whitespace()
                .map(|s| s.parse::<usize>().map_err(|e| MeshError::Parse(e.to_string())))
                .collect::<Result<_, _>>()?;
            if vs.len() != 4 {
                return Err(MeshError::Parse(format!("bad tet line `{l}`")));
            }
            tets.push([vs[0], vs[1], vs[2], vs[3]]);
        }
        Self::from_parts(vertices, tets)
    }

    /// Single reference tetrahedron (0,0,0)-(1,0,0)-(0,1,0)-(0,0,1).
    pub fn reference_tet() -> Self {
        Self::from_parts(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap()
    }
}
