//! Discontinuous Galerkin solver for a heterodimer reaction-diffusion model
//! of misfolded protein spreading on polytopal meshes.

// Validation uses negated comparisons on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dgspace;
pub mod mesh;
pub mod sparse;
pub mod kinetics;
pub mod timestepping;
pub mod sim;
pub mod verification;
