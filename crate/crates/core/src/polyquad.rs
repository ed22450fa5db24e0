//! Barycentric polynomial bases on simplices and quadrature rules on
//! tetrahedra, triangles and edges.
//!
//! Quadrature uses conical (Duffy) product rules built from Gauss-Jacobi
//! 1D rules computed by Golub-Welsch, so a rule of any requested degree is
//! generated on demand and validated against the exact factorial formula
//! for barycentric monomials.

use crate::mesh::{FaceFrame, TetGeometry, V3};
use nalgebra::DMatrix;
use std::sync::{Arc, OnceLock};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Tet,
    Tri,
    Edge,
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Tet => 3,
            Domain::Tri => 2,
            Domain::Edge => 1,
        }
    }

    pub fn reference_measure(&self) -> f64 {
        match self {
            Domain::Tet => 1.0 / 6.0,
            Domain::Tri => 0.5,
            Domain::Edge => 1.0,
        }
    }

    pub fn max_degree(&self) -> usize {
        match self {
            Domain::Tet => 14,
            Domain::Tri | Domain::Edge => 20,
        }
    }
}

#[derive(Debug, Error)]
pub enum PolyQuadError {
    #[error("unsupported quadrature degree {degree} on {domain:?} (max {max})")]
    UnsupportedDegree {
        domain: Domain,
        degree: usize,
        max: usize,
    },
}

/// Complete basis of barycentric monomials of total degree `k` on a simplex.
///
/// On a tet the `d+1 = 4` exponents sum to `k`; the span is all of `P_k`
/// because the coordinates sum to one.
#[derive(Clone, Debug)]
pub struct ScalarBasis {
    pub domain: Domain,
    pub degree: usize,
    /// Exponents, trailing entries zero for lower-dimensional domains.
    pub exponents: Vec<[usize; 4]>,
}

pub fn basis_scalar(k: usize, domain: Domain) -> ScalarBasis {
    let nvert = domain.dim() + 1;
    let mut exponents = Vec::new();
    // Enumerate all compositions of k into nvert parts, lexicographic.
     fn rec(nvert: usize, slot: usize, left: usize, cur: &mut [usize; 4], out: &mut Vec<[usize; 4]>) {
        if slot == nvert - 1 {
            cur[slot] = left;
            out.push(*cur);
            return;
        }
        for a in (0..=left).rev() {
            cur[slot] = a;
            rec(nvert, slot + 1, left - a, cur, out);
        }
        cur[slot] = 0;
    }
    let mut cur = [0usize; 4];
    rec(nvert, 0, k, &mut cur, &mut exponents);
    ScalarBasis {
        domain,
        degree: k,
        exponents,
    }
}

impl ScalarBasis {
    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn eval_one(&self, i: usize, bary: &[f64]) -> f64 {
        let mut v = 1.0;
        for (a, &e) in self.exponents[i].iter().enumerate().take(self.domain.dim() + 1) {
            v *= bary[a].powi(e as i32);
        }
        v
    }

    pub fn eval(&self, bary: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| self.eval_one(i, bary)).collect()
    }

    /// Spatial gradient on a tet, by the chain rule through `grad lambda`.
    pub fn grad_tet(&self, geom: &TetGeometry, bary: &[f64; 4]) -> Vec<V3> {
        assert_eq!(self.domain, Domain::Tet);
        self.exponents
            .iter()
            .map(|e| {
                let mut g = V3::zeros();
                for a in 0..4 {
                    if e[a] == 0 {
                        continue;
                    }
                    let mut part = e[a] as f64 * bary[a].powi(e[a] as i32 - 1);
                    for b in 0..4 {
                        if b != a {
                            part *= bary[b].powi(e[b] as i32);
                        }
                    }
                    g += geom.grad_lambda[a] * part;
                }
                g
            })
            .collect()
    }
}

/// Quadrature rule in barycentric coordinates; weights sum to the reference
/// measure of the domain.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub domain: Domain,
    pub degree: usize,
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

/// Gauss-Jacobi rule on [0,1] with weight `(1-x)^alpha`, by Golub-Welsch.
fn gauss_jacobi_01(n: usize, alpha: usize) -> (Vec<f64>, Vec<f64>) {
    let a = alpha as f64;
    let b = 0.0;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let denom = (2.0 * kf + a + b) * (2.0 * kf + a + b + 2.0);
        let diag = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / denom
        };
        jac[(k, k)] = diag;
        if k + 1 < n {
            let k1 = kf + 1.0;
            let num = 4.0 * k1 * (k1 + a) * (k1 + b) * (k1 + a + b);
            let den = (2.0 * k1 + a + b).powi(2) * (2.0 * k1 + a + b + 1.0) * (2.0 * k1 + a + b - 1.0);
            let off = (num / den).sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(jac);
    // mu0 = int_{-1}^{1} (1-x)^alpha dx = 2^{alpha+1}/(alpha+1).
    let mu0 = 2f64.powi(alpha as i32 + 1) / (a + 1.0);
    let mut nodes_weights: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let w = mu0 * eig.eigenvectors[(0, i)].powi(2);
            // Map [-1,1] with weight (1-x)^alpha to [0,1] with (1-u)^alpha.
            ((1.0 + x) / 2.0, w / 2f64.powi(alpha as i32 + 1))
        })
        .collect();
    nodes_weights.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    nodes_weights.into_iter().unzip()
}

fn build_rule(domain: Domain, degree: usize) -> QuadratureRule {
    let n = degree / 2 + 1; // exact for total degree 2n-1 >= degree
    let (mut points, mut weights) = (Vec::new(), Vec::new());
    match domain {
        Domain::Edge => {
            // 1D rules are cheap; the surplus points keep smooth non-polynomial
            // edge moments (interpolation of trigonometric fields) at rounding
            // accuracy rather than merely at polynomial exactness.
            let n = degree + 1;
            let (x, w) = gauss_jacobi_01(n, 0);
            for i in 0..n {
                points.push([1.0 - x[i], x[i], 0.0, 0.0]);
                weights.push(w[i]);
            }
        }
        Domain::Tri => {
            let (x1, w1) = gauss_jacobi_01(n, 0);
            let (x2, w2) = gauss_jacobi_01(n, 1);
            for i in 0..n {
                for j in 0..n {
                    let y = x2[j];
                    let x = x1[i] * (1.0 - y);
                    points.push([1.0 - x - y, x, y, 0.0]);
                    weights.push(w1[i] * w2[j]);
                }
            }
        }
        Domain::Tet => {
            let (x1, w1) = gauss_jacobi_01(n, 0);
            let (x2, w2) = gauss_jacobi_01(n, 1);
            let (x3, w3) = gauss_jacobi_01(n, 2);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let z = x3[k];
                        let y = x2[j] * (1.0 - z);
                        let x = x1[i] * (1.0 - y - z);
                        points.push([1.0 - x - y - z, x, y, z]);
                        weights.push(w1[i] * w2[j] * w3[k]);
                    }
                }
            }
        }
    }
    QuadratureRule {
        domain,
        degree,
        points,
        weights,
    }
}

/// Returns the cached rule of exactness at least `degree`. The cache is an
/// indexed table of `OnceLock`s, so lookups are lock-free once built.
pub fn quadrature(domain: Domain, degree: usize) -> Result<Arc<QuadratureRule>, PolyQuadError> {
    if degree > domain.max_degree() {
        return Err(PolyQuadError::UnsupportedDegree {
            domain,
            degree,
            max: domain.max_degree(),
        });
    }
    const MAX_DEG: usize = 21;
    static CACHE: OnceLock<Vec<OnceLock<Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (0..3 * MAX_DEG).map(|_| OnceLock::new()).collect());
    let slot = match domain {
        Domain::Tet => 0,
        Domain::Tri => MAX_DEG,
        Domain::Edge => 2 * MAX_DEG,
    } + degree;
    Ok(cache[slot]
        .get_or_init(|| Arc::new(build_rule(domain, degree)))
        .clone())
}

/// Integrates `f` over a physical tet with a rule of the given degree.
pub fn integrate_tet(geom: &TetGeometry, degree: usize, mut f: impl FnMut(&V3) -> f64) -> f64 {
    let rule = quadrature(Domain::Tet, degree).expect("tet degree in range");
    let scale = 6.0 * geom.volume;
    let mut acc = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let x = geom.point_from_lambda(p);
        acc += w * scale * f(&x);
    }
    acc
}

/// Integrates `f` over a physical triangle.
pub fn integrate_face(frame: &FaceFrame, degree: usize, mut f: impl FnMut(&V3) -> f64) -> f64 {
    let rule = quadrature(Domain::Tri, degree).expect("tri degree in range");
    let scale = 2.0 * frame.area;
    let mut acc = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let x = frame.point_from_lambda(&[p[0], p[1], p[2]]);
        acc += w * scale * f(&x);
    }
    acc
}

/// Integrates `f` over the segment `a..b`.
pub fn integrate_edge(a: &V3, b: &V3, degree: usize, mut f: impl FnMut(&V3) -> f64) -> f64 {
    let rule = quadrature(Domain::Edge, degree).expect("edge degree in range");
    let len = (b - a).norm();
    let mut acc = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let x = a * p[0] + b * p[1];
        acc += w * len * f(&x);
    }
    acc
}

/// Exact value of `int_simplex prod lambda_i^{a_i}` by the factorial formula
/// `d! |S| prod a_i! / (|a| + d)!`.
pub fn factorial_moment(domain: Domain, measure: f64, exps: &[usize]) -> f64 {
    let d = domain.dim();
    let total: usize = exps.iter().sum();
    let mut val = factorial(d) * measure;
    for &a in exps {
        val *= factorial(a);
    }
    val / factorial(total + d)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TetMesh;
    use crate::rng::SplitMix64;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn basis_dimensions() {
        assert_eq!(basis_scalar(1, Domain::Tet).dim(), 4);
        assert_eq!(basis_scalar(2, Domain::Tet).dim(), 10);
        assert_eq!(basis_scalar(3, Domain::Tet).dim(), 20);
        let b = basis_scalar(0, Domain::Tri);
        assert_eq!(b.dim(), 1);
        assert_relative_eq!(b.eval_one(0, &[0.3, 0.3, 0.4]), 1.0);
    }

    #[test]
    fn reference_measures() {
        for (dom, val) in [
            (Domain::Tet, 1.0 / 6.0),
            (Domain::Tri, 0.5),
            (Domain::Edge, 1.0),
        ] {
            let rule = quadrature(dom, 8).unwrap();
            let sum: f64 = rule.weights.iter().sum();
            assert_relative_eq!(sum, val, epsilon = 1e-14);
        }
    }

    #[test]
    fn quarticproduct_on_reference_tet() {
        // int lambda0 lambda1 lambda2 lambda3 = 1/5040 on the reference tet.
        let rule = quadrature(Domain::Tet, 4).unwrap();
        let val: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p[0] * p[1] * p[2] * p[3])
            .sum();
        assert_relative_eq!(val, 1.0 / 5040.0, epsilon = 1e-16);
    }

    #[test]
    fn tri_squared_moment() {
        let rule = quadrature(Domain::Tri, 2).unwrap();
        let val: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p[0] * p[0])
            .sum();
        assert_relative_eq!(val, 1.0 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn factorial_formula_all_domains() {
        // Every monomial up to the rule degree matches the closed form.
        for dom in [Domain::Tet, Domain::Tri, Domain::Edge] {
            for degree in [3usize, 7, 11] {
                let rule = quadrature(dom, degree).unwrap();
                let basis = basis_scalar(degree, dom);
                for i in 0..basis.dim() {
                    let exact = factorial_moment(
                        dom,
                        dom.reference_measure(),
                        &basis.exponents[i][..dom.dim() + 1],
                    );
                    let got: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * basis.eval_one(i, p))
                        .sum();
                    assert_relative_eq!(got, exact, max_relative = 1e-13, epsilon = 1e-17);
                }
            }
        }
    }

    #[test]
    fn unsupported_degree_rejected() {
        assert!(quadrature(Domain::Tet, 15).is_err());
        assert!(quadrature(Domain::Tri, 21).is_err());
    }

    #[test]
    fn physical_integrals() {
        let mesh = TetMesh::build_cube_mesh(1).unwrap();
        let g = mesh.tet_geometry(3);
        assert_relative_eq!(integrate_tet(&g, 1, |_| 1.0), g.volume, epsilon = 1e-15);
        // int lambda_0 = V/4 on any tet.
        let val = integrate_tet(&g, 2, |x| g.lambda(x)[0]);
        assert_relative_eq!(val, g.volume / 4.0, max_relative = 1e-13);
    }

    #[test]
    fn sin_cubed_on_unit_edge() {
        let a = V3::new(0.0, 0.0, 0.0);
        let b = V3::new(1.0, 0.0, 0.0);
        let val = integrate_edge(&a, &b, 12, |x| (std::f64::consts::PI * x.x).sin().powi(3));
        assert_relative_eq!(val, 4.0 / (3.0 * std::f64::consts::PI), epsilon = 1e-10);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mesh = TetMesh::build_cube_mesh(2).unwrap().perturb(0.2, 8).unwrap();
        let g = mesh.tet_geometry(11);
        let basis = basis_scalar(3, Domain::Tet);
        let mut rng = SplitMix64::new(4);
        let coeffs: Vec<f64> = (0..basis.dim()).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let p = g.point_from_lambda(&[0.3, 0.25, 0.25, 0.2]);
        let eval_at = |x: &V3| -> f64 {
            let lam = g.lambda(x);
            (0..basis.dim()).map(|i| coeffs[i] * basis.eval_one(i, &lam)).sum()
        };
        let grads = basis.grad_tet(&g, &g.lambda(&p));
        let mut grad = V3::zeros();
        for i in 0..basis.dim() {
            grad += grads[i] * coeffs[i];
        }
        let h = 1e-6;
        for a in 0..3 {
            let mut hi = p;
            let mut lo = p;
            hi[a] += h;
            lo[a] -= h;
            let fd = (eval_at(&hi) - eval_at(&lo)) / (2.0 * h);
            assert_relative_eq!(grad[a], fd, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn factorial_formula_random_tets(seed in 0u64..1000) {
            // Random shape-regular tets: quadrature matches the factorial
            // formula for monomials up to the rule degree.
            let mut rng = SplitMix64::new(seed);
            let verts: [crate::mesh::V3; 4] = loop {
                let v: [crate::mesh::V3; 4] = std::array::from_fn(|_| {
                    crate::mesh::V3::new(
                        rng.uniform(0.0, 1.0),
                        rng.uniform(0.0, 1.0),
                        rng.uniform(0.0, 1.0),
                    )
                });
                let vol = (v[1] - v[0]).cross(&(v[2] - v[0])).dot(&(v[3] - v[0])) / 6.0;
                if vol > 0.01 {
                    break v;
                }
            };
            let g = TetGeometry::new(verts);
            let degree = 6;
            let basis = basis_scalar(degree, Domain::Tet);
            for i in 0..basis.dim() {
                let exact = factorial_moment(Domain::Tet, g.volume, &basis.exponents[i]);
                let got = integrate_tet(&g, degree, |x| basis.eval_one(i, &g.lambda(x)));
                prop_assert!((got - exact).abs() <= 1e-12 * exact.abs().max(1e-6));
            }
        }
    }
}
