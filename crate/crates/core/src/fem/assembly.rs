//! Global assembly with constraint elimination.
//!
//! Ordering contract: local contributions are computed in parallel but inserted in
//! ascending cell order, and within a cell in row-major local order. Duplicate entries
//! are summed in that insertion order, so the result is bit-identical to a serial run.

use rayon::prelude::*;

use super::dofmap::{Dof, DofMap};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Dense local matrix (row-major) and residual vector for one cell.
#[derive(Clone, Debug, Default)]
pub struct Local {
    pub matrix: Vec<f64>,
    pub vector: Vec<f64>,
}

pub trait ElementKernel: Sync {
    /// Raw dof indices of the cell, in the local ordering used by `evaluate`.
    fn local_dofs(&self, cell: usize) -> Vec<usize>;

    /// Local residual and, when `with_matrix`, its Jacobian with respect to the local
    /// values `local` (gathered from the raw state).
    fn evaluate(&self, cell: usize, local: &[f64], with_matrix: bool) -> Result<Local>;
}

/// Jacobian on the free dofs and `rhs = -R`, so that solving gives the Newton update.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

fn evaluate_all<K: ElementKernel>(n_cells: usize, kernel: &K, raw_state: &[f64], with_matrix: bool) -> Result<Vec<(Vec<usize>, Local)>> {
    (0..n_cells)
        .into_par_iter()
        .map(|c| {
            let dofs = kernel.local_dofs(c);
            let local: Vec<f64> = dofs.iter().map(|&d| raw_state[d]).collect();
            let out = kernel.evaluate(c, &local, with_matrix)?;
            let m = dofs.len();
            if out.vector.len() != m || (with_matrix && out.matrix.len() != m * m) {
                return Err(Error::Argument(format!("kernel returned wrong local sizes for cell {c}")));
            }
            if out.vector.iter().chain(out.matrix.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Assembly { cell: c });
            }
            Ok((dofs, out))
        })
        .collect()
}

/// Residual on the free dofs; slave rows are folded onto their masters and fixed rows
/// are dropped.
pub fn assemble_residual<K: ElementKernel>(n_cells: usize, dofmap: &DofMap, kernel: &K, raw_state: &[f64]) -> Result<Vec<f64>> {
    let locals = evaluate_all(n_cells, kernel, raw_state, false)?;
    let mut r = vec![0.0; dofmap.n_free()];
    for (dofs, l) in &locals {
        for (a, &d) in dofs.iter().enumerate() {
            if let Dof::Free(i) = dofmap.dof(d) {
                r[i] += l.vector[a];
            }
        }
    }
    Ok(r)
}

/// Residual indexed by raw dof, fixed and slave rows included; reaction forces are read
/// off the fixed rows.
pub fn assemble_raw_residual<K: ElementKernel>(n_cells: usize, dofmap: &DofMap, kernel: &K, raw_state: &[f64]) -> Result<Vec<f64>> {
    let locals = evaluate_all(n_cells, kernel, raw_state, false)?;
    let mut r = vec![0.0; dofmap.n_raw()];
    for (dofs, l) in &locals {
        for (a, &d) in dofs.iter().enumerate() {
            r[d] += l.vector[a];
        }
    }
    Ok(r)
}

/// Assembles the Jacobian and negative residual at `raw_state`.
pub fn assemble<K: ElementKernel>(n_cells: usize, dofmap: &DofMap, kernel: &K, raw_state: &[f64]) -> Result<SparseSystem> {
    let locals = evaluate_all(n_cells, kernel, raw_state, true)?;
    let mut r = vec![0.0; dofmap.n_free()];
    let mut triplets = Vec::with_capacity(locals.iter().map(|(d, _)| d.len() * d.len()).sum());
    for (dofs, l) in &locals {
        let m = dofs.len();
        let map: Vec<Option<usize>> = dofs
            .iter()
            .map(|&d| match dofmap.dof(d) {
                Dof::Free(i) => Some(i),
                Dof::Fixed(_) => None,
            })
            .collect();
        for a in 0..m {
            let Some(i) = map[a] else { continue };
            r[i] += l.vector[a];
            for b in 0..m {
                if let Some(j) = map[b] {
                    triplets.push((i, j, l.matrix[a * m + b]));
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(dofmap.n_free(), &triplets);
    drop(triplets);
    if let Some(&row) = matrix.empty_rows().first() {
        return Err(Error::Solver(format!("free dof {row} has an empty matrix row")));
    }
    r.iter_mut().for_each(|v| *v = -*v);
    Ok(SparseSystem { matrix, rhs: r })
}
