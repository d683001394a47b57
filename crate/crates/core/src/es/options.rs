use serde::{Deserialize, Serialize};

use crate::kernel::SolverSettings;
use crate::model::{ElementMode, Protocol};
use crate::{Error, Result};

/// Weights of the penalty terms in the coefficient-step SDP. `mu` and `nu`
/// are in normalized units: the offload part of the objective is divided by
/// the total bandwidth-time of the offloading UEs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySettings {
    /// Weight of the downlink value of harvested energy.
    pub mu: f64,
    /// Initial weight of the binary-amplitude penalty (mode switching).
    pub nu: f64,
    /// Rank-one threshold relative to the trace of the expansion point.
    pub rank_eps: f64,
    /// Escalation factor for `nu`.
    pub growth: f64,
    pub max_escalations: usize,
}

impl Default for PenaltySettings {
    fn default() -> Self {
        PenaltySettings { mu: 1.0, nu: 0.01, rank_eps: 1e-4, growth: 10.0, max_escalations: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub settings: SolverSettings,
    pub penalty: PenaltySettings,
    /// Cap on semidefinite-relaxation passes per coefficient step (per
    /// penalty level for mode switching).
    pub relaxed_passes: usize,
    /// Iteration cap of the rank-constrained pass.
    pub rank_max_iter: usize,
    /// Fraction of the harvested energy held back so the energy constraints
    /// stay strictly satisfiable across alternation steps.
    pub energy_margin: f64,
    /// Seed of the random initial phases.
    pub init_seed: u64,
    /// Run independent charging-time candidates on the rayon pool.
    pub parallel: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            // Candidates are judged on the true objective, so the coefficient
            // SDPs only need moderate accuracy.
            settings: SolverSettings {
                sdp_primal_tol: 1e-4,
                sdp_dual_tol: 1e-4,
                sdp_max_iter: 5000,
                ..SolverSettings::default()
            },
            penalty: PenaltySettings::default(),
            relaxed_passes: 4,
            rank_max_iter: 500,
            energy_margin: 1e-4,
            init_seed: 0,
            parallel: true,
        }
    }
}

/// Structural restrictions of the surface for one optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub protocol: Protocol,
    pub downlink: Vec<ElementMode>,
    pub uplink: Vec<ElementMode>,
}

impl Variant {
    /// Unrestricted STAR surface under `protocol`.
    pub fn star(protocol: Protocol, elements: usize) -> Self {
        let uplink = match protocol {
            Protocol::Ts => ElementMode::Unit,
            Protocol::Es | Protocol::Ms => ElementMode::Split,
        };
        Variant {
            protocol,
            downlink: vec![ElementMode::Split; elements],
            uplink: vec![uplink; elements],
        }
    }

    /// Reflect-only first half, transmit-only second half, in both directions.
    pub fn conventional(elements: usize) -> Result<Self> {
        if elements % 2 != 0 {
            return Err(Error::Config(format!(
                "the conventional surface needs an even element count, got {elements}"
            )));
        }
        let layout: Vec<ElementMode> = (0..elements)
            .map(|m| if m < elements / 2 { ElementMode::ReflectOnly } else { ElementMode::TransmitOnly })
            .collect();
        Ok(Variant { protocol: Protocol::Es, downlink: layout.clone(), uplink: layout })
    }

    pub fn elements(&self) -> usize {
        self.downlink.len()
    }

    /// Whether the binary uplink penalty applies.
    pub fn binary_uplink(&self) -> bool {
        self.protocol == Protocol::Ms
    }
}
