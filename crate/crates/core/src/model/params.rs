use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Scalar system constants, all in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Uplink bandwidth, Hz.
    pub bandwidth: f64,
    /// Receiver noise power at the AP, W.
    pub noise_power: f64,
    /// Energy-harvesting efficiency.
    pub eta: f64,
    /// UE transmit power cap, W.
    pub p_max: f64,
    /// UE CPU frequency cap, cycles/s.
    pub f_max: f64,
    /// Effective switched capacitance, J s^2 / cycle^3.
    pub kappa: f64,
    /// Mission period T, s.
    pub period: f64,
    /// AP transmit power during charging, W.
    pub ap_power: f64,
    /// Number of surface elements M.
    pub elements: usize,
    /// CPU cycles needed per bit, one entry per UE.
    pub cycles_per_bit: Vec<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub max_iterations: usize,
}

impl SystemParams {
    /// Default constants: 20 MHz, -50 dBm noise, 80% harvesting efficiency,
    /// 0.1 W / 8 GHz UE caps, kappa = 1e-28, T = 1 s, P0 = 1 W, 1000 cycles/bit.
    pub fn defaults(elements: usize, ues: usize) -> Self {
        SystemParams {
            bandwidth: 20e6,
            noise_power: dbm_to_watts(-50.0),
            eta: 0.8,
            p_max: 0.1,
            f_max: 8e9,
            kappa: 1e-28,
            period: 1.0,
            ap_power: 1.0,
            elements,
            cycles_per_bit: vec![1000.0; ues],
            epsilon: 1e-4,
            delta: 1e-4,
            max_iterations: 50,
        }
    }

    pub fn num_ues(&self) -> usize {
        self.cycles_per_bit.len()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth", self.bandwidth),
            ("noise_power", self.noise_power),
            ("eta", self.eta),
            ("p_max", self.p_max),
            ("f_max", self.f_max),
            ("kappa", self.kappa),
            ("period", self.period),
            ("ap_power", self.ap_power),
            ("epsilon", self.epsilon),
            ("delta", self.delta),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.eta > 1.0 {
            return Err(Error::Config(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if self.elements == 0 {
            return Err(Error::Config("elements must be at least 1".into()));
        }
        if self.cycles_per_bit.is_empty() {
            return Err(Error::Config("at least one UE is required".into()));
        }
        if let Some(c) = self.cycles_per_bit.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Config(format!("cycles_per_bit must be positive, got {c}")));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}
