//! Sparse direct solves backed by faer: supernodal Cholesky for symmetric positive
//! definite matrices, LU with partial pivoting otherwise.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Mat, Side};

use super::assembly::SparseSystem;
use super::sparse::{norm, CsrMatrix};
use crate::error::{Error, Result};

enum Factor {
    Llt(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

/// A numeric factorization together with the matrix it came from (kept for residual
/// checks and refinement).
pub struct Factorization {
    factor: Factor,
    matrix: CsrMatrix,
}

enum Symbolic {
    Llt(SymbolicLlt<usize>),
    Lu(SymbolicLu<usize>),
}

/// Reuses the symbolic analysis while the sparsity pattern stays the same.
#[derive(Default)]
pub struct LinearSolver {
    cached: Option<(Vec<usize>, Vec<usize>, Symbolic)>,
}

fn view(m: &CsrMatrix) -> SparseColMatRef<'_, usize, f64> {
    // CSR arrays of A read as CSC describe Aᵀ.
    let sym = SymbolicSparseColMatRef::new_checked(m.n, m.n, &m.row_ptr, None, &m.col_idx);
    SparseColMatRef::new(sym, &m.values)
}

impl LinearSolver {
    pub fn new() -> Self {
        Self::default()
    }

    fn symbolic(&mut self, m: &CsrMatrix, want_llt: bool) -> Result<&Symbolic> {
        let hit = matches!(&self.cached, Some((rp, ci, s))
            if rp == &m.row_ptr && ci == &m.col_idx && matches!(s, Symbolic::Llt(_)) == want_llt);
        if !hit {
            let sym = view(m).symbolic();
            let s = if want_llt {
                Symbolic::Llt(SymbolicLlt::try_new(sym, Side::Lower).map_err(|e| Error::Solver(format!("{e:?}")))?)
            } else {
                Symbolic::Lu(SymbolicLu::try_new(sym).map_err(|e| Error::Solver(format!("{e:?}")))?)
            };
            self.cached = Some((m.row_ptr.clone(), m.col_idx.clone(), s));
        }
        Ok(&self.cached.as_ref().unwrap().2)
    }

    pub fn factorize(&mut self, m: &CsrMatrix) -> Result<Factorization> {
        if m.n == 0 {
            return Err(Error::Solver("empty system".into()));
        }
        if m.is_symmetric(1e-12) {
            if let Symbolic::Llt(s) = self.symbolic(m, true)? {
                if let Ok(f) = Llt::try_new_with_symbolic(s.clone(), view(m), Side::Lower) {
                    return Ok(Factorization {
                        factor: Factor::Llt(f),
                        matrix: m.clone(),
                    });
                }
            }
        }
        let Symbolic::Lu(s) = self.symbolic(m, false)? else {
            unreachable!()
        };
        let f = Lu::try_new_with_symbolic(s.clone(), view(m)).map_err(|e| Error::Solver(format!("LU factorization failed: {e:?}")))?;
        Ok(Factorization {
            factor: Factor::Lu(f),
            matrix: m.clone(),
        })
    }
}

impl Factorization {
    pub fn new(m: &CsrMatrix) -> Result<Self> {
        LinearSolver::new().factorize(m)
    }

    pub fn is_cholesky(&self) -> bool {
        matches!(self.factor, Factor::Llt(_))
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        let x = match &self.factor {
            Factor::Llt(f) => f.solve(&rhs),
            // The factor holds Aᵀ.
            Factor::Lu(f) => f.solve_transpose(&rhs),
        };
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solves `A x = b` with up to three steps of iterative refinement towards
    /// `‖Ax - b‖ ≤ 1e-10 ‖b‖`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let bn = norm(b);
        if bn == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let mut x = self.raw_solve(b);
        let mut res = residual(&self.matrix, &x, b);
        for _ in 0..3 {
            if norm(&res) <= 1e-10 * bn {
                break;
            }
            let dx = self.raw_solve(&res);
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
            res = residual(&self.matrix, &x, b);
        }
        let rel = norm(&res) / bn;
        if !rel.is_finite() || x.iter().any(|v| !v.is_finite()) || rel > 1e-6 {
            return Err(Error::Solver(format!(
                "factorization is singular or ill-conditioned (relative residual {rel:e})"
            )));
        }
        Ok(x)
    }
}

fn residual(m: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    m.mul_vec(x).iter().zip(b).map(|(ax, b)| b - ax).collect()
}

pub fn solve_linear(system: &SparseSystem) -> Result<Vec<f64>> {
    Factorization::new(&system.matrix)?.solve(&system.rhs)
}
