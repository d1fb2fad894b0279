//! Acoustic self-consistent field solvers.

pub mod discrete;

pub use discrete::{
    cross_section, evaluate_field, solve_dirichlet, solve_discrete, solve_impedance, solve_neumann,
    DiscreteFieldSolution, DiscreteOptions,
};
pub mod continuum;

pub use continuum::{
    born_continuum, evaluate_continuum, schrodinger_residual, solve_continuum, solve_hard,
    solve_impedance_continuum, solve_soft, ContinuumOptions, ContinuumProblem, GridFieldSolution,
};
