//! Bits a UE can compute from a given amount of harvested energy, with its
//! uplink channel and interference held fixed. Concave and non-decreasing in
//! the energy, so the downlink part of the coefficient step can maximize it
//! through tangent planes.

use std::f64::consts::LN_2;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyValue {
    pub bandwidth: f64,
    /// Offloading window, s.
    pub window: f64,
    /// Local computing window, s.
    pub local_window: f64,
    /// `g / (noise + interference)`, 1/W.
    pub snr_per_watt: f64,
    pub kappa: f64,
    pub cycles_per_bit: f64,
    pub p_max: f64,
    pub f_max: f64,
}

/// Optimal split of an energy budget and its value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyUse {
    pub power: f64,
    pub cpu: f64,
    pub bits: f64,
    /// Derivative of `bits` with respect to the energy, bits/J.
    pub slope: f64,
}

impl EnergyValue {
    fn cpu_for(&self, rest: f64) -> f64 {
        if self.local_window <= 0.0 || rest <= 0.0 {
            return 0.0;
        }
        (rest / (self.kappa * self.local_window)).cbrt().min(self.f_max)
    }

    fn bits_at(&self, energy: f64, p: f64) -> f64 {
        let f = self.cpu_for(energy - p * self.window);
        self.bandwidth * self.window * (p * self.snr_per_watt).ln_1p() / LN_2
            + f * self.local_window / self.cycles_per_bit
    }

    /// Offload marginal per joule at power `p`.
    fn offload_slope(&self, p: f64) -> f64 {
        self.bandwidth * self.snr_per_watt / (LN_2 * (1.0 + p * self.snr_per_watt))
    }

    /// Local marginal per joule at frequency `f` (infinite at zero).
    fn local_slope(&self, f: f64) -> f64 {
        if self.local_window <= 0.0 {
            0.0
        } else if f <= 0.0 {
            f64::INFINITY
        } else {
            1.0 / (3.0 * self.kappa * self.cycles_per_bit * f * f)
        }
    }

    pub fn best(&self, energy: f64) -> EnergyUse {
        let energy = energy.max(0.0);
        let p_cap = if self.window > 0.0 && self.snr_per_watt > 0.0 {
            self.p_max.min(energy / self.window)
        } else {
            0.0
        };
        // d bits / dp is decreasing in p; bisect for its root.
        let deriv = |p: f64| {
            let f = self.cpu_for(energy - p * self.window);
            let local = if f >= self.f_max { 0.0 } else { self.local_slope(f) };
            self.window * (self.offload_slope(p) - local)
        };
        let p = if p_cap <= 0.0 || deriv(0.0) <= 0.0 {
            0.0
        } else if deriv(p_cap) >= 0.0 {
            p_cap
        } else {
            let (mut lo, mut hi) = (0.0, p_cap);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if deriv(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * p_cap {
                    break;
                }
            }
            0.5 * (lo + hi)
        };
        let f = self.cpu_for(energy - p * self.window);
        let slope = if f < self.f_max && self.local_window > 0.0 {
            self.local_slope(f)
        } else if p < self.p_max && self.window > 0.0 {
            self.offload_slope(p)
        } else {
            0.0
        };
        EnergyUse { power: p, cpu: f, bits: self.bits_at(energy, p), slope }
    }

    pub fn bits(&self, energy: f64) -> f64 {
        self.best(energy).bits
    }
}
