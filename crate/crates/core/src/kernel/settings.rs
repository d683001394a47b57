use serde::{Deserialize, Serialize};

/// Tolerances and limits shared by every solver in the kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// LP feasibility tolerance, relative to row scale.
    pub lp_tol: f64,
    /// Required KKT residual of the barrier method.
    pub smooth_kkt_tol: f64,
    pub smooth_max_newton: usize,
    /// Required primal residual of the SDP solver (rows normalized).
    pub sdp_primal_tol: f64,
    /// Required dual residual of the SDP solver (objective normalized).
    pub sdp_dual_tol: f64,
    /// Relative objective change between checks treated as a stall.
    pub sdp_stall_tol: f64,
    pub sdp_max_iter: usize,
    /// ADMM over-relaxation factor.
    pub sdp_alpha: f64,
    /// Initial ADMM penalty.
    pub sdp_rho: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            lp_tol: 1e-10,
            smooth_kkt_tol: 1e-7,
            smooth_max_newton: 500,
            sdp_primal_tol: 1e-6,
            sdp_dual_tol: 1e-6,
            sdp_stall_tol: 1e-6,
            sdp_max_iter: 20_000,
            sdp_alpha: 1.6,
            sdp_rho: 1.0,
        }
    }
}
