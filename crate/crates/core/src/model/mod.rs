//! Domain types and the closed-form physics of the system.

mod coefficients;
mod params;
mod rates;

pub use coefficients::{ElementMode, StarCoefficients, UplinkOperation};
pub use params::{dbm_to_watts, db_to_linear, SystemParams};
pub use rates::{
    channel_gain, compose_channel, evaluate, harvested_energy, local_bits_and_energy,
    offload_bits, offload_bits_from_gains, RateReport, Residuals,
};

use serde::{Deserialize, Serialize};

use crate::C64;

/// Link direction: downlink carries wireless power, uplink carries offloaded bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Downlink,
    Uplink,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Downlink, Direction::Uplink];

    pub fn index(self) -> usize {
        match self {
            Direction::Downlink => 0,
            Direction::Uplink => 1,
        }
    }
}

/// Half-space of the surface a UE lives in. The AP is on the reflection side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Reflection,
    Transmission,
}

impl Side {
    pub const ALL: [Side; 2] = [Side::Reflection, Side::Transmission];

    pub fn index(self) -> usize {
        match self {
            Side::Reflection => 0,
            Side::Transmission => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Reflection => Side::Transmission,
            Side::Transmission => Side::Reflection,
        }
    }
}

/// Surface operating protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    /// Energy splitting: fractional per-element amplitudes.
    Es,
    /// Mode switching: binary per-element uplink assignment.
    Ms,
    /// Time splitting: the uplink alternates between a reflection slot and a
    /// transmission slot, each with the whole surface in one mode.
    Ts,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Es => "ES",
            Protocol::Ms => "MS",
            Protocol::Ts => "TS",
        }
    }
}

/// One UE drop: its side and distance to the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeSite {
    pub side: Side,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UePlacement {
    pub ap_ris_distance: f64,
    pub ues: Vec<UeSite>,
}

impl UePlacement {
    pub fn sides(&self) -> Vec<Side> {
        self.ues.iter().map(|u| u.side).collect()
    }
}

/// Small-scale plus large-scale channel vectors, one entry per surface element.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// AP to surface (downlink).
    pub g_ap_ris: Vec<C64>,
    /// Surface to AP (uplink).
    pub h_ap_ris: Vec<C64>,
    /// Surface to UE i (downlink).
    pub g_ris_ue: Vec<Vec<C64>>,
    /// UE i to surface (uplink).
    pub h_ris_ue: Vec<Vec<C64>>,
    pub sides: Vec<Side>,
}

impl ChannelSet {
    pub fn elements(&self) -> usize {
        self.g_ap_ris.len()
    }

    pub fn num_ues(&self) -> usize {
        self.sides.len()
    }

    /// Per-element cascade `ue_m * ap_m`; the composite channel is
    /// `sum_m cascade_m * sqrt(beta_m) * exp(j theta_m)`.
    pub fn cascade(&self, ue: usize, direction: Direction) -> Vec<C64> {
        let (ap, ue_vec) = match direction {
            Direction::Downlink => (&self.g_ap_ris, &self.g_ris_ue[ue]),
            Direction::Uplink => (&self.h_ap_ris, &self.h_ris_ue[ue]),
        };
        ap.iter().zip(ue_vec).map(|(a, u)| a * u).collect()
    }

    pub fn check(&self) -> crate::Result<()> {
        let m = self.elements();
        let i = self.num_ues();
        if self.h_ap_ris.len() != m {
            return Err(crate::Error::Dimension(format!(
                "uplink AP vector has {} entries, expected {m}",
                self.h_ap_ris.len()
            )));
        }
        if self.g_ris_ue.len() != i || self.h_ris_ue.len() != i {
            return Err(crate::Error::Dimension(format!(
                "{} sides but {}/{} UE channel vectors",
                i,
                self.g_ris_ue.len(),
                self.h_ris_ue.len()
            )));
        }
        for (k, (g, h)) in self.g_ris_ue.iter().zip(&self.h_ris_ue).enumerate() {
            if g.len() != m || h.len() != m {
                return Err(crate::Error::Dimension(format!(
                    "UE {k} channel vectors have {}/{} entries, expected {m}",
                    g.len(),
                    h.len()
                )));
            }
        }
        let finite = |v: &[C64]| v.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite(&self.g_ap_ris)
            || !finite(&self.h_ap_ris)
            || !self.g_ris_ue.iter().all(|v| finite(v))
            || !self.h_ris_ue.iter().all(|v| finite(v))
        {
            return Err(crate::Error::Domain("non-finite channel entry".into()));
        }
        Ok(())
    }

    /// Same channels with every entry scaled to zero.
    pub fn zeroed(&self) -> ChannelSet {
        let z = |v: &Vec<C64>| vec![C64::new(0.0, 0.0); v.len()];
        ChannelSet {
            g_ap_ris: z(&self.g_ap_ris),
            h_ap_ris: z(&self.h_ap_ris),
            g_ris_ue: self.g_ris_ue.iter().map(z).collect(),
            h_ris_ue: self.h_ris_ue.iter().map(z).collect(),
            sides: self.sides.clone(),
        }
    }
}

/// Time split and per-UE resources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationState {
    pub tau0: f64,
    /// Reflection-slot length (TS only).
    pub tau_r: f64,
    /// Transmission-slot length (TS only).
    pub tau_t: f64,
    pub power: Vec<f64>,
    pub cpu: Vec<f64>,
}

impl AllocationState {
    pub fn idle(tau0: f64, ues: usize) -> Self {
        AllocationState {
            tau0,
            tau_r: 0.0,
            tau_t: 0.0,
            power: vec![0.0; ues],
            cpu: vec![0.0; ues],
        }
    }

    /// Offloading window of a UE on `side` under `protocol`.
    pub fn offload_window(&self, params: &SystemParams, protocol: Protocol, side: Side) -> f64 {
        match protocol {
            Protocol::Es | Protocol::Ms => (params.period - self.tau0).max(0.0),
            Protocol::Ts => match side {
                Side::Reflection => self.tau_r,
                Side::Transmission => self.tau_t,
            },
        }
    }
}

/// Whether UE `j` interferes with UE `i` at the AP under `protocol`.
pub fn interferes(protocol: Protocol, sides: &[Side], i: usize, j: usize) -> bool {
    i != j && (protocol != Protocol::Ts || sides[i] == sides[j])
}
