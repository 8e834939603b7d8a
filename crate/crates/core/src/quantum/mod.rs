//! Dense complex linear algebra, operators and propagators.

mod expm;
mod matrix;
pub mod ode;
mod operator;
mod propagate;

pub use expm::{matrix_exponential, solve};
pub use matrix::{ComplexMatrix, DensityMatrix, StateVector};
pub use operator::{Periodicity, TimeDependentOperator, TimeFactor};
pub use propagate::{
    generator_matrix, propagate_constant, propagate_lindblad, propagate_schrodinger, CollapseKind,
    CollapseOperator, LindbladSystem, LindbladTrajectory, SchrodingerSystem,
};
