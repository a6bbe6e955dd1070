//! Independent checks: a boundary-fixed finite-difference solver for the
//! full interface problem, and the classical one-phase Stefan problem with its
//! similarity solution.

mod fd;
mod neumann;

pub use fd::{fd_solve, FdConfig, FdFields, FdTrajectory};
pub use neumann::{
    classical_stefan_via_machinery, neumann_lambda, ClassicalStefanRun, NeumannProblem,
};
