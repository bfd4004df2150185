//! Dense complex linear algebra and conic programs.

pub mod cmatrix;
pub mod conic;
pub mod lowering;

use thiserror::Error;

pub use cmatrix::{kron, max_eig_hermitian, vec, CMatrix, C64};
pub use conic::{
    solve_conic, solve_conic_with, ConeBlock, ConeKind, ConicProgram, ConicSolution, ConicStatus,
    LinExpr, SolverSettings,
};
pub use lowering::{push_quadratic_le, CAffine};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid conic program: {0}")]
    InvalidProgram(String),
    #[error("cannot parse program dump: {0}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Program(#[from] NumericsError),
    #[error("subproblem infeasible at the current anchor")]
    Infeasible,
    #[error("subproblem unbounded")]
    Unbounded,
    #[error("solver stalled (max residual {0:.3e})")]
    NumericalTrouble(f64),
}

/// Solves `p`, retrying once with tolerances relaxed by 100× when the first
/// attempt stalls. A feasible point returned with reduced accuracy is
/// accepted; callers of subproblems re-check what they use.
pub fn solve_or_relax(p: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution, SolveError> {
    let first = solve_conic_with(p, settings)?;
    let sol = match first.status {
        ConicStatus::NumericalTrouble => {
            let relaxed = SolverSettings {
                feas_tol: settings.feas_tol * 100.0,
                gap_tol: settings.gap_tol * 100.0,
                max_iter: settings.max_iter * 2,
            };
            solve_conic_with(p, &relaxed)?
        }
        _ => first,
    };
    match sol.status {
        ConicStatus::Optimal | ConicStatus::ReducedAccuracy => Ok(sol),
        ConicStatus::Infeasible => Err(SolveError::Infeasible),
        ConicStatus::Unbounded => Err(SolveError::Unbounded),
        ConicStatus::NumericalTrouble => Err(SolveError::NumericalTrouble(sol.max_residual)),
    }
}
