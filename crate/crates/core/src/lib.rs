//! Torque harmonics of a 2D surface-mounted PM synchronous machine under
//! dynamic rotor eccentricity, with Monte Carlo and polynomial-chaos
//! uncertainty quantification.
//!
//! The pipeline is
//! [`machine::MachineSpec`] -> [`mesh::build_mesh`] ->
//! [`eccentricity::apply_eccentricity`] -> [`simulation::PreparedMachine`] ->
//! [`torque::TorqueTrace`] -> [`spectrum::spectrum_and_thd`], and the
//! [`uq`] module drives it over random eccentricity parameters.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod assembly;
pub mod coupling;
pub mod eccentricity;
pub mod error;
pub mod machine;
pub mod mesh;
pub mod run;
pub mod simulation;
pub mod sparse;
pub mod spectrum;
pub mod torque;
pub mod uq;

pub use error::{Domain, Error, Result};
