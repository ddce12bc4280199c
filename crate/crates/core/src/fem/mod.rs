//! Finite-element machinery shared by the cell and macroscale solvers.

pub mod assembly;
pub mod dofmap;
pub mod hex;
pub mod linsolve;
pub mod newton;
pub mod sparse;

pub use assembly::{assemble, assemble_raw_residual, assemble_residual, ElementKernel, Local, SparseSystem};
pub use dofmap::{Dof, DofMap};
pub use hex::QuadratureRule;
pub use linsolve::{solve_linear, Factorization, LinearSolver};
pub use newton::{newton_solve, NewtonOptions, NewtonProblem, NewtonReport};
pub use sparse::CsrMatrix;
