//! One iteration of the lifted problem as a conic program, and its solution.

mod assemble;
mod backend;
mod problem;

pub use assemble::{assemble_iteration, q_affine, trace_terms, x_affine, HermitianAffine};
pub use backend::{
    solve, solve_with, ClarabelSolver, ConicSolution, ConicSolver, RawSolve, SolveStats, SolveStatus,
    RETRY_RELAXATION,
};
pub use problem::{unpack_upper, AffineRow, Cone, ConeBlock, ConicProblem, Family, VarLayout};
