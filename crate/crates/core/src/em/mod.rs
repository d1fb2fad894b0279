//! Electromagnetic scattering by small bodies.
//!
//! The EM kernel is `g = e^{ikr}/r`, without the `1/4π` of the acoustic
//! kernel; the S-matrix carries the `k²V/4π` prefactor.

mod continuum;
mod discrete;
mod smatrix;

pub use continuum::{born_em_continuum, em_refinement_sensitivity, evaluate_em_continuum, solve_em_continuum, EmDensity};
pub use discrete::{solve_em_discrete, solve_em_with_tensors, EMFieldSolution, EmOptions, EmSiteKind, EmTensors};
pub use smatrix::{
    beta_tilde_from_b, build_smatrix, build_smatrix_complex, compose_beta_tilde, dipole_far_fields, EmConstants, EmIncident, SMatrix6,
};
