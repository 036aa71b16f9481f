//! Dense numerical kernels used by the solvers.
//!
//! Everything here is stateless and sized for desk-scale instances: a few
//! dozen variables, matrices no larger than the antenna count.

mod barrier;
mod blp;
mod eig;
mod qp;

pub use barrier::{
    phase_one, solve_convex_barrier, BarrierOptions, BarrierSolution, ConvexConstraint,
    LinearConstraint, SmoothConvexProgram,
};
pub use blp::{enumerate_binary_assignments, BinarySearchResult, MAX_SEARCH_SPACE};
pub use eig::{canonical_phase, leading_gen_eigpair, psd_sqrt_real, quad_form, rayleigh_quotient};
pub use qp::{project_onto_polytope, LinearConstraintSet, Projection, QpOptions};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is singular or not positive definite")]
    SingularMatrix,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("constraint set is infeasible (phase-one residual {residual:.3e})")]
    Infeasible { residual: f64 },
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("newton failure at stage {stage}, step {step}: {reason} (last decrement {:?})", trace.last())]
    NewtonFailure {
        stage: usize,
        step: usize,
        reason: String,
        trace: Vec<f64>,
    },
    #[error("search space of {size} assignments exceeds the cap of {cap}")]
    SearchSpaceTooLarge { size: u128, cap: u128 },
}
