//! Refinement studies: solve, post-process, measure, and report observed
//! orders in CSV and markdown.

use super::*;
use crate::quadcurl::errors::{compute_errors, ErrorNorms};
use std::io::Write;

#[derive(Clone, Debug, Default)]
pub struct ConvergenceRecord {
    pub k: usize,
    pub l: usize,
    pub rows: Vec<ErrorNorms>,
}

impl ConvergenceRecord {
    /// `log2(e_coarse / e_fine)` between consecutive levels for one field
    /// (indexed as in [`ErrorNorms::FIELDS`]).
    pub fn orders(&self, field: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for w in self.rows.windows(2) {
            let (a, b) = (w[0].values()[field], w[1].values()[field]);
            out.push((a / b).log2());
        }
        out
    }

    /// Observed order at the finest level pair.
    pub fn finest_order(&self, field: usize) -> f64 {
        *self.orders(field).last().unwrap_or(&f64::NAN)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "level,h,dofs_u,dofs_lambda,dofs_phi")?;
        for f in ErrorNorms::FIELDS {
            write!(w, ",{f}")?;
        }
        writeln!(w)?;
        for r in &self.rows {
            write!(
                w,
                "{},{:e},{},{},{}",
                r.level, r.h, r.dofs_u, r.dofs_lambda, r.dofs_phi
            )?;
            for v in r.values() {
                write!(w, ",{v:e}")?;
            }
            writeln!(w)?;
        }
        for pair in 0..self.rows.len().saturating_sub(1) {
            write!(w, "order_{}_{},,,,", pair, pair + 1)?;
            for f in 0..ErrorNorms::FIELDS.len() {
                write!(w, ",{:e}", self.orders(f)[pair])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_markdown<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let fmt = |v: f64| format!("{v:.5e}");
        write!(w, "| quantity |")?;
        for r in &self.rows {
            write!(w, " level {} (h={}) |", r.level, fmt(r.h))?;
        }
        writeln!(w)?;
        write!(w, "|---|")?;
        for _ in &self.rows {
            write!(w, "---|")?;
        }
        writeln!(w)?;
        write!(w, "| dofs (u/lambda/phi) |")?;
        for r in &self.rows {
            write!(w, " {}/{}/{} |", r.dofs_u, r.dofs_lambda, r.dofs_phi)?;
        }
        writeln!(w)?;
        for (f, name) in ErrorNorms::FIELDS.iter().enumerate() {
            write!(w, "| {name} |")?;
            for r in &self.rows {
                write!(w, " {} |", fmt(r.values()[f]))?;
            }
            writeln!(w)?;
            let orders = self.orders(f);
            write!(w, "| order |")?;
            write!(w, " - |")?;
            for o in orders {
                write!(w, " {o:.2} |")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Runs the hybridized solver over a refinement hierarchy starting from the
/// perturbed two-cell cube mesh, post-processing and measuring each level.
pub fn convergence_study(
    levels: usize,
    k: usize,
    l: usize,
    seed: u64,
    amplitude: f64,
    opts: &SolverOptions,
) -> Result<ConvergenceRecord, SolveError> {
    assert!(levels >= 1);
    let exact = manufactured();
    let mut mesh = Arc::new(
        TetMesh::build_cube_mesh(2)
            .map_err(|e| crate::assembly::AssemblyError::Unsupported(e.to_string()))?
            .perturb(amplitude, seed)
            .map_err(|e| crate::assembly::AssemblyError::Unsupported(e.to_string()))?,
    );
    let mut record = ConvergenceRecord {
        k,
        l,
        rows: Vec::new(),
    };
    for level in 0..levels {
        let sol = solve_hybrid(&mesh, k, l, &exact, opts)?;
        let star = postprocess(&sol, k)?;
        let mut row = compute_errors(&sol, &exact, Some(&star), opts.quad_degree);
        row.level = level;
        record.rows.push(row);
        if level + 1 < levels {
            mesh = Arc::new(
                mesh.refine_uniform()
                    .map_err(|e| crate::assembly::AssemblyError::Unsupported(e.to_string()))?,
            );
        }
    }
    Ok(record)
}

/// Observed orders of the superconvergent quantity `||curl(I_h u - u_h)||`.
pub fn superconvergence_check(
    levels: usize,
    k: usize,
    l: usize,
    seed: u64,
    amplitude: f64,
    opts: &SolverOptions,
) -> Result<Vec<f64>, SolveError> {
    let record = convergence_study(levels, k, l, seed, amplitude, opts)?;
    let idx = ErrorNorms::FIELDS
        .iter()
        .position(|&f| f == "err_supercurl")
        .unwrap();
    Ok(record.orders(idx))
}
