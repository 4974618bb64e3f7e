//! Small conic-program solver.
//!
//! Supports products of zero, nonnegative, second-order, exponential and
//! positive semidefinite cones. Problems are assembled with
//! [`ProblemBuilder`] and solved by operator splitting on the homogeneous
//! self-dual embedding ([`Solver`]).

pub mod cone;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod problem;
pub mod solver;

pub use cone::{pack_symmetric, packed_index, packed_len, project_exp, project_psd, project_soc, unpack_symmetric, Cone};
pub use embed::{hermitian_embed, hermitian_unembed};
pub use error::{ConicError, Result};
pub use problem::{AffineExpr, ConicProblem, ProblemBuilder, SparseMatrix};
pub use solver::{solve, ConicSolution, Residuals, SolveStatus, Solver, SolverSettings, WarmStart};
