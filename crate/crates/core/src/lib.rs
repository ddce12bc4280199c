//! Multiscale finite-strain poroelasticity: periodic cell problems for the solid and the
//! fluid, a neural surrogate of the solid cell response, and a homogenized
//! consolidation solver with a linear Biot reference.

pub mod artifact;
pub mod config;
pub mod error;
pub mod fem;
pub mod fluid;
pub mod macroscale;
pub mod material;
pub mod mesh;
pub mod scaling;
pub mod solid;
pub mod surrogate;
pub mod tensor;

pub use error::{Error, Result};
