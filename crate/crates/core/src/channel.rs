//! Seeded Rayleigh-fading channel generation.
//!
//! Every entry is `sqrt(rho d^-alpha) * phi` with `phi ~ CN(0, 1)`. Each
//! (link, UE) pair draws from its own ChaCha stream keyed by the master seed,
//! so adding elements or UEs never changes the channels already drawn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::model::{ChannelSet, Side, SystemParams, UePlacement, UeSite};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    /// Linear gain at the 1 m reference distance.
    pub rho: f64,
    /// UE to surface (uplink).
    pub alpha_u1: f64,
    /// Surface to AP (uplink).
    pub alpha_u2: f64,
    /// Surface to UE (downlink).
    pub alpha_d1: f64,
    /// AP to surface (downlink).
    pub alpha_d2: f64,
    pub seed: u64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams {
            rho: 1e-3,
            alpha_u1: 3.0,
            alpha_u2: 3.0,
            alpha_d1: 3.0,
            alpha_d2: 3.5,
            seed: 0,
        }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::Config(format!("rho must be positive, got {}", self.rho)));
        }
        for (name, a) in [
            ("alpha_u1", self.alpha_u1),
            ("alpha_u2", self.alpha_u2),
            ("alpha_d1", self.alpha_d1),
            ("alpha_d2", self.alpha_d2),
        ] {
            if !(a.is_finite() && a >= 2.0) {
                return Err(Error::Config(format!("{name} must be at least 2, got {a}")));
            }
        }
        Ok(())
    }
}

const AP_DOWN: u64 = 0;
const AP_UP: u64 = 1;
const UE_BASE: u64 = 2;
const DROP_BASE: u64 = 1 << 32;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn draw(rng: &mut ChaCha8Rng, n: usize, amplitude: f64) -> Vec<C64> {
    let s = amplitude * std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            C64::new(s * x, s * y)
        })
        .collect()
}

fn amplitude(rho: f64, d: f64, alpha: f64) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::Domain(format!("link distance must be positive, got {d}")));
    }
    Ok((rho * d.powf(-alpha)).sqrt())
}

/// Draw one channel realization for `placement`.
pub fn generate(params: &SystemParams, placement: &UePlacement, pl: &PathLossParams) -> Result<ChannelSet> {
    let m = params.elements;
    let d0 = placement.ap_ris_distance;
    let g_ap_ris = draw(&mut stream(pl.seed, AP_DOWN), m, amplitude(pl.rho, d0, pl.alpha_d2)?);
    let h_ap_ris = draw(&mut stream(pl.seed, AP_UP), m, amplitude(pl.rho, d0, pl.alpha_u2)?);
    let mut g_ris_ue = Vec::with_capacity(placement.ues.len());
    let mut h_ris_ue = Vec::with_capacity(placement.ues.len());
    for (i, ue) in placement.ues.iter().enumerate() {
        let id = UE_BASE + 2 * i as u64;
        g_ris_ue.push(draw(&mut stream(pl.seed, id), m, amplitude(pl.rho, ue.distance, pl.alpha_d1)?));
        h_ris_ue.push(draw(&mut stream(pl.seed, id + 1), m, amplitude(pl.rho, ue.distance, pl.alpha_u1)?));
    }
    Ok(ChannelSet {
        g_ap_ris,
        h_ap_ris,
        g_ris_ue,
        h_ris_ue,
        sides: placement.sides(),
    })
}

/// Where UEs may be dropped: uniform distance to the surface within an
/// annulus on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub ap_ris_distance: f64,
    pub reflection_range: [f64; 2],
    pub transmission_range: [f64; 2],
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            ap_ris_distance: 2.0,
            reflection_range: [1.0, 2.0],
            transmission_range: [1.0, 2.0],
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.ap_ris_distance.is_finite() && self.ap_ris_distance > 0.0) {
            return Err(Error::Config(format!(
                "ap_ris_distance must be positive, got {}",
                self.ap_ris_distance
            )));
        }
        for (name, [lo, hi]) in [
            ("reflection_range", self.reflection_range),
            ("transmission_range", self.transmission_range),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::Config(format!("{name} must satisfy 0 < min <= max, got [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Drop `ues` UEs alternating reflection, transmission, reflection, ...
    pub fn place(&self, ues: usize, seed: u64) -> UePlacement {
        let ues = (0..ues)
            .map(|i| {
                let side = if i % 2 == 0 { Side::Reflection } else { Side::Transmission };
                let [lo, hi] = match side {
                    Side::Reflection => self.reflection_range,
                    Side::Transmission => self.transmission_range,
                };
                let mut rng = stream(seed, DROP_BASE + i as u64);
                let distance = if hi > lo { rng.gen_range(lo..hi) } else { lo };
                UeSite { side, distance }
            })
            .collect();
        UePlacement { ap_ris_distance: self.ap_ris_distance, ues }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn placement(distances: &[f64]) -> UePlacement {
        UePlacement {
            ap_ris_distance: 1.0,
            ues: distances
                .iter()
                .enumerate()
                .map(|(i, &d)| UeSite {
                    side: if i % 2 == 0 { Side::Reflection } else { Side::Transmission },
                    distance: d,
                })
                .collect(),
        }
    }

    fn mean_power(v: &[C64]) -> f64 {
        v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64
    }

    #[test]
    fn same_seed_same_channels() {
        let params = SystemParams::defaults(8, 3);
        let pl = PathLossParams { seed: 42, ..Default::default() };
        let p = placement(&[1.5, 2.0, 3.0]);
        assert_eq!(generate(&params, &p, &pl).unwrap(), generate(&params, &p, &pl).unwrap());
        let other = PathLossParams { seed: 43, ..Default::default() };
        assert_ne!(generate(&params, &p, &pl).unwrap(), generate(&params, &p, &other).unwrap());
    }

    #[test]
    fn unit_distance_power_is_rho() {
        let params = SystemParams::defaults(100_000, 1);
        let pl = PathLossParams { seed: 7, alpha_d1: 3.7, ..Default::default() };
        let ch = generate(&params, &placement(&[1.0]), &pl).unwrap();
        for v in [&ch.g_ap_ris, &ch.h_ap_ris, &ch.g_ris_ue[0], &ch.h_ris_ue[0]] {
            let r = mean_power(v) / pl.rho;
            assert!((r - 1.0).abs() < 0.02, "{r}");
        }
    }

    #[test]
    fn doubling_distance_divides_power_by_eight() {
        let params = SystemParams::defaults(100_000, 2);
        let pl = PathLossParams { seed: 9, ..Default::default() };
        let ch = generate(&params, &placement(&[1.0, 2.0]), &pl).unwrap();
        // UE 0 at 1 m, UE 1 at 2 m, alpha = 3 on the surface-UE links.
        let ratio = mean_power(&ch.g_ris_ue[1]) / mean_power(&ch.g_ris_ue[0]);
        assert!((ratio * 8.0 - 1.0).abs() < 0.02, "{ratio}");
        let normalized = mean_power(&ch.h_ris_ue[1]) / (pl.rho * 2f64.powf(-3.0));
        assert!((normalized - 1.0).abs() < 0.02, "{normalized}");
    }

    #[test]
    fn streams_are_uncorrelated() {
        let params = SystemParams::defaults(100_000, 2);
        let pl = PathLossParams { seed: 1, ..Default::default() };
        let ch = generate(&params, &placement(&[1.0, 1.0]), &pl).unwrap();
        let pairs = [
            (&ch.g_ris_ue[0], &ch.g_ris_ue[1]),
            (&ch.g_ris_ue[0], &ch.h_ris_ue[0]),
            (&ch.g_ap_ris, &ch.h_ap_ris),
        ];
        for (a, b) in pairs {
            let cross: C64 = a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum();
            let corr = cross.norm() / (a.len() as f64 * pl.rho);
            assert!(corr < 0.02, "{corr}");
        }
    }

    #[test]
    fn adding_elements_or_ues_keeps_prefix() {
        let pl = PathLossParams { seed: 5, ..Default::default() };
        let small = generate(&SystemParams::defaults(4, 2), &placement(&[1.0, 2.0]), &pl).unwrap();
        let big = generate(&SystemParams::defaults(8, 3), &placement(&[1.0, 2.0, 3.0]), &pl).unwrap();
        assert_eq!(small.g_ap_ris[..], big.g_ap_ris[..4]);
        for i in 0..2 {
            assert_eq!(small.h_ris_ue[i][..], big.h_ris_ue[i][..4]);
        }
    }

    #[test]
    fn zero_distance_rejected() {
        let params = SystemParams::defaults(2, 1);
        let r = generate(&params, &placement(&[0.0]), &PathLossParams::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn placement_alternates_and_stays_in_range() {
        let geo = Geometry {
            ap_ris_distance: 2.0,
            reflection_range: [1.0, 2.0],
            transmission_range: [3.0, 4.0],
        };
        let p = geo.place(5, 11);
        assert_eq!(p, geo.place(5, 11));
        for (i, u) in p.ues.iter().enumerate() {
            if i % 2 == 0 {
                assert_eq!(u.side, Side::Reflection);
                assert!((1.0..2.0).contains(&u.distance));
            } else {
                assert_eq!(u.side, Side::Transmission);
                assert!((3.0..4.0).contains(&u.distance));
            }
        }
        assert_eq!(geo.place(3, 11).ues[..], p.ues[..3]);
    }
}
