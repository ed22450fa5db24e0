//! Quad-curl drivers: the manufactured solution, the mixed and hybridized
//! solvers, post-processing, error norms and convergence studies.

mod convergence;
mod errors;
mod postprocess;
mod solvers;

pub use convergence::{convergence_study, superconvergence_check, ConvergenceRecord};
pub use errors::{check_solution, compute_errors, interpolate_exact_u, ErrorNorms, SolutionChecks};
pub use postprocess::postprocess;
pub use solvers::{compare_solutions, solve_hybrid, solve_mixed, BlockDiff, SolverOptions};

use crate::assembly::FieldCoefficients;
use crate::fields::{separable_product, Factor1D, MatrixField, ScalarField, VectorField};
use crate::mesh::{TetMesh, V3};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Assembly(#[from] crate::assembly::AssemblyError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error("post-processing system singular on tet {tet}")]
    SingularLocal { tet: usize },
}

/// Closed-form exact solution `u = curl (g, g, 0)` with
/// `g = sin^3(pi x) sin^3(pi y) sin^3(pi z)`, and the derived fields
/// `sigma = grad curl u` and `f = -curl laplace curl u`.
pub struct ManufacturedSolution {
    pub u: VectorField,
    pub curl_u: VectorField,
    pub sigma: MatrixField,
    pub f: VectorField,
}

impl ManufacturedSolution {
    pub fn u_at(&self, x: &V3) -> V3 {
        self.u.eval(x)
    }

    pub fn curl_u_at(&self, x: &V3) -> V3 {
        self.curl_u.eval(x)
    }

    pub fn sigma_at(&self, x: &V3) -> crate::poly::M3 {
        self.sigma.eval(x)
    }

    pub fn f_at(&self, x: &V3) -> V3 {
        self.f.eval(x)
    }
}

/// Builds the manufactured solution from the separable factor
/// `s(t) = sin^3(pi t) = (3 sin(pi t) - sin(3 pi t)) / 4`.
pub fn manufactured() -> ManufacturedSolution {
    let s = vec![
        (0.75, Factor1D::sin(PI)),
        (-0.25, Factor1D::sin(3.0 * PI)),
    ];
    let g = separable_product(&s, &s, &s);
    let potential = VectorField([g.clone(), g, ScalarField::zero()]);
    let u = potential.curl();
    let curl_u = u.curl();
    let sigma = curl_u.grad();
    let f = curl_u.laplacian().curl().scaled(-1.0);
    ManufacturedSolution {
        u,
        curl_u,
        sigma,
        f,
    }
}

/// Discrete solution blocks of either solver.
pub struct QuadCurlSolution {
    pub mesh: Arc<TetMesh>,
    pub k: usize,
    pub l: usize,
    /// Traceless stress block; continuous space for the mixed solver,
    /// broken for the hybridized one.
    pub sigma: FieldCoefficients,
    pub u: FieldCoefficients,
    pub phi: FieldCoefficients,
    pub lambda: Option<FieldCoefficients>,
    /// Relative residual of the full (uncondensed) system.
    pub residual: f64,
    pub dofs_u: usize,
    pub dofs_lambda: usize,
    pub dofs_phi: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use approx::assert_relative_eq;

    #[test]
    fn center_value_and_divergence() {
        let ms = manufactured();
        let center = V3::new(0.5, 0.5, 0.5);
        assert!(ms.u_at(&center).norm() < 1e-13);
        // div u = 0 via finite differences of u at random points.
        let mut rng = SplitMix64::new(6);
        let h = 1e-5;
        for _ in 0..1000 {
            let p = V3::new(
                rng.uniform(0.1, 0.9),
                rng.uniform(0.1, 0.9),
                rng.uniform(0.1, 0.9),
            );
            let mut div = 0.0;
            for a in 0..3 {
                let mut hi = p;
                let mut lo = p;
                hi[a] += h;
                lo[a] -= h;
                div += (ms.u_at(&hi)[a] - ms.u_at(&lo)[a]) / (2.0 * h);
            }
            assert!(div.abs() < 1e-9, "div u = {div:.3e} at {p:?}");
        }
        // exact divergence from the field algebra is identically zero
        assert!(ms.u.div().0.is_empty());
    }

    #[test]
    fn boundary_conditions() {
        let ms = manufactured();
        let mut rng = SplitMix64::new(8);
        for _ in 0..200 {
            let (a, b) = (rng.next_f64(), rng.next_f64());
            for face_pt in [
                V3::new(0.0, a, b),
                V3::new(1.0, a, b),
                V3::new(a, 0.0, b),
                V3::new(a, 1.0, b),
                V3::new(a, b, 0.0),
                V3::new(a, b, 1.0),
            ] {
                assert!(ms.u_at(&face_pt).norm() < 1e-12);
                assert!(ms.curl_u_at(&face_pt).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn sigma_traceless() {
        let ms = manufactured();
        let mut rng = SplitMix64::new(14);
        for _ in 0..100 {
            let p = V3::new(rng.next_f64(), rng.next_f64(), rng.next_f64());
            let tr = ms.sigma_at(&p).trace();
            assert!(tr.abs() < 1e-11, "trace {tr:.3e}");
        }
    }

    #[test]
    fn f_matches_finite_difference_oracle() {
        // f = -curl laplace curl u by nested 4th-order differences of u.
        let ms = manufactured();
        let h = 1e-3;
        let d1 = |f: &dyn Fn(&V3) -> f64, p: &V3, a: usize| {
            let mut pts = [*p; 4];
            pts[0][a] -= 2.0 * h;
            pts[1][a] -= h;
            pts[2][a] += h;
            pts[3][a] += 2.0 * h;
            (f(&pts[0]) - 8.0 * f(&pts[1]) + 8.0 * f(&pts[2]) - f(&pts[3])) / (12.0 * h)
        };
        let curl_fd = |f: &dyn Fn(&V3) -> V3, p: &V3| -> V3 {
            let comp = |i: usize| move |x: &V3| f(x)[i];
            V3::new(
                d1(&comp(2), p, 1) - d1(&comp(1), p, 2),
                d1(&comp(0), p, 2) - d1(&comp(2), p, 0),
                d1(&comp(1), p, 0) - d1(&comp(0), p, 1),
            )
        };
        let d2 = |f: &dyn Fn(&V3) -> f64, p: &V3, a: usize| {
            let mut pts = [*p; 5];
            pts[0][a] -= 2.0 * h;
            pts[1][a] -= h;
            pts[3][a] += h;
            pts[4][a] += 2.0 * h;
            (-f(&pts[0]) + 16.0 * f(&pts[1]) - 30.0 * f(&pts[2]) + 16.0 * f(&pts[3])
                - f(&pts[4]))
                / (12.0 * h * h)
        };
        let mut rng = SplitMix64::new(77);
        for _ in 0..20 {
            let p = V3::new(
                rng.uniform(0.2, 0.8),
                rng.uniform(0.2, 0.8),
                rng.uniform(0.2, 0.8),
            );
            let w = |x: &V3| ms.curl_u_at(x);
            let lap_w = |x: &V3| {
                V3::new(
                    (0..3).map(|a| d2(&|y: &V3| w(y).x, x, a)).sum(),
                    (0..3).map(|a| d2(&|y: &V3| w(y).y, x, a)).sum(),
                    (0..3).map(|a| d2(&|y: &V3| w(y).z, x, a)).sum(),
                )
            };
            let f_fd = -curl_fd(&lap_w, &p);
            let f_exact = ms.f_at(&p);
            let rel = (f_fd - f_exact).norm() / f_exact.norm().max(1.0);
            assert!(rel < 1e-5, "FD oracle mismatch {rel:.3e} at {p:?}");
        }
    }

    #[test]
    fn sigma_is_grad_curl_u() {
        let ms = manufactured();
        let h = 1e-5;
        let mut rng = SplitMix64::new(3);
        for _ in 0..50 {
            let p = V3::new(
                rng.uniform(0.1, 0.9),
                rng.uniform(0.1, 0.9),
                rng.uniform(0.1, 0.9),
            );
            let s = ms.sigma_at(&p);
            for i in 0..3 {
                for j in 0..3 {
                    let mut hi = p;
                    let mut lo = p;
                    hi[j] += h;
                    lo[j] -= h;
                    let fd = (ms.curl_u_at(&hi)[i] - ms.curl_u_at(&lo)[i]) / (2.0 * h);
                    assert_relative_eq!(s[(i, j)], fd, max_relative = 1e-5, epsilon = 1e-6);
                }
            }
        }
    }
}
