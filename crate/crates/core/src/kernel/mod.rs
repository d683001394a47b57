//! Small dense solvers for the convex subproblems: a vertex-enumeration LP,
//! a log-barrier Newton method for smooth concave programs, an ADMM solver for
//! SDPs over Hermitian PSD blocks, and a Hermitian leading-eigenpair routine.

mod eig;
mod lp;
mod sdp;
mod settings;
mod smooth;

pub use eig::{leading_eig, lambda_max};
pub use lp::{solve_lp, LpProblem, LpSolution};
pub use sdp::{
    solve_sdp, BlockId, Relation, SdpProblem, SdpSolution, Sense, Term, WarmStart,
};
pub use settings::SolverSettings;
pub use smooth::{solve_smooth, SmoothConcaveProblem, SmoothSolution};

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<crate::C64>;
