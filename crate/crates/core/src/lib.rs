//! Tetrahedral finite element toolkit for the distributional curl-div complex.
//!
//! The crate provides:
//! - tetrahedral meshes of the unit cube with perturbation and uniform red
//!   refinement ([`mesh`]),
//! - barycentric polynomial bases and simplex quadrature ([`polyquad`]),
//! - local elements for traceless tangential-normal continuous tensors,
//!   Nédélec edge elements, Lagrange elements and face multipliers
//!   ([`elements`]),
//! - global spaces, interpolation and bilinear-form assembly ([`assembly`]),
//! - sparse/dense symmetric solvers and rank tools ([`linalg`]),
//! - mixed and hybridized solvers for the quad-curl problem with
//!   post-processing and convergence studies ([`quadcurl`]),
//! - structural certification of the discrete complex ([`complexcheck`]).

pub mod assembly;
pub mod complexcheck;
pub mod elements;
pub mod fields;
pub mod linalg;
pub mod mesh;
pub mod poly;
pub mod polyquad;
pub mod quadcurl;
pub mod rng;

pub use mesh::TetMesh;

/// Caps rayon parallelism for element loops when `QUADCURL_THREADS` is set.
///
/// Results are bit-identical regardless of thread count: parallel loops
/// produce per-element buffers that are merged in element order.
pub fn install_thread_cap() {
    if let Ok(v) = std::env::var("QUADCURL_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                // Ignore the error if a global pool already exists.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}
