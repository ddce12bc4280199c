//! Homogenized finite-strain consolidation and its linear Biot reference.

pub mod ale;
pub mod column;
pub mod constitutive;
pub mod linear;
pub mod provider;

pub use ale::{run_consolidation, AleModel};
pub use column::{march, Column, ColumnModel, ColumnOptions, StepRecord, TimeSeries};
pub use constitutive::{effective_stress, effective_stress_derivatives, transformed_conductivity, transformed_darcy};
pub use linear::{derive_linear_params, run_linear_reference, LinearModel, LinearPoroParams};
pub use provider::{DnsProvider, LinearProvider, MicroProvider, MicroSample, ZeroProvider};
