use serde::{Deserialize, Serialize};

use super::{
    interferes, AllocationState, ChannelSet, Direction, Protocol, Side, StarCoefficients,
    SystemParams, UplinkOperation,
};
use crate::{Error, Result, C64};

fn check_dims(channels: &ChannelSet, coeffs: &StarCoefficients, ue: usize) -> Result<()> {
    if coeffs.elements() != channels.elements() {
        return Err(Error::Dimension(format!(
            "coefficients have {} elements, channels {}",
            coeffs.elements(),
            channels.elements()
        )));
    }
    if ue >= channels.num_ues() {
        return Err(Error::Dimension(format!(
            "UE index {ue} out of range for {} UEs",
            channels.num_ues()
        )));
    }
    if channels.g_ris_ue[ue].len() != channels.elements()
        || channels.h_ris_ue[ue].len() != channels.elements()
        || channels.h_ap_ris.len() != channels.elements()
    {
        return Err(Error::Dimension(format!("UE {ue} channel length mismatch")));
    }
    Ok(())
}

/// Composite AP-surface-UE channel of `ue` in `direction`. The UE's side
/// selects which beam of the surface it sees.
pub fn compose_channel(
    channels: &ChannelSet,
    coeffs: &StarCoefficients,
    ue: usize,
    direction: Direction,
) -> Result<C64> {
    check_dims(channels, coeffs, ue)?;
    let side = channels.sides[ue];
    let (ap, ue_vec) = match direction {
        Direction::Downlink => (&channels.g_ap_ris, &channels.g_ris_ue[ue]),
        Direction::Uplink => (&channels.h_ap_ris, &channels.h_ris_ue[ue]),
    };
    Ok((0..channels.elements())
        .map(|m| ue_vec[m] * coeffs.element(direction, side, m) * ap[m])
        .sum())
}

/// `|h|^2` of the composite channel.
pub fn channel_gain(
    channels: &ChannelSet,
    coeffs: &StarCoefficients,
    ue: usize,
    direction: Direction,
) -> Result<f64> {
    compose_channel(channels, coeffs, ue, direction).map(|h| h.norm_sqr())
}

/// Energy harvested by `ue` during `tau0` seconds of charging, J.
pub fn harvested_energy(
    params: &SystemParams,
    channels: &ChannelSet,
    coeffs: &StarCoefficients,
    tau0: f64,
    ue: usize,
) -> Result<f64> {
    if !(tau0 >= 0.0) || tau0 > params.period {
        return Err(Error::Domain(format!(
            "charging time {tau0} outside [0, {}]",
            params.period
        )));
    }
    let g = channel_gain(channels, coeffs, ue, Direction::Downlink)?;
    Ok(params.eta * tau0 * params.ap_power * g)
}

/// Offloaded bits of `ue` given every UE's uplink gain `|h_j|^2`.
pub fn offload_bits_from_gains(
    params: &SystemParams,
    uplink_gains: &[f64],
    sides: &[Side],
    alloc: &AllocationState,
    protocol: Protocol,
    ue: usize,
) -> f64 {
    let window = alloc.offload_window(params, protocol, sides[ue]);
    if window <= 0.0 {
        return 0.0;
    }
    let interference: f64 = (0..uplink_gains.len())
        .filter(|&j| interferes(protocol, sides, ue, j))
        .map(|j| alloc.power[j].max(0.0) * uplink_gains[j])
        .sum();
    let sinr = alloc.power[ue].max(0.0) * uplink_gains[ue] / (interference + params.noise_power);
    window * params.bandwidth * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Offloaded bits of `ue`. Under ES and MS every other UE interferes; under TS
/// only UEs sharing the slot (same side) do.
pub fn offload_bits(
    params: &SystemParams,
    channels: &ChannelSet,
    coeffs: &StarCoefficients,
    alloc: &AllocationState,
    protocol: Protocol,
    ue: usize,
) -> Result<f64> {
    check_dims(channels, coeffs, ue)?;
    let gains = uplink_gains(channels, coeffs)?;
    check_alloc(alloc, channels.num_ues())?;
    Ok(offload_bits_from_gains(params, &gains, &channels.sides, alloc, protocol, ue))
}

fn uplink_gains(channels: &ChannelSet, coeffs: &StarCoefficients) -> Result<Vec<f64>> {
    (0..channels.num_ues())
        .map(|j| channel_gain(channels, coeffs, j, Direction::Uplink))
        .collect()
}

fn check_alloc(alloc: &AllocationState, ues: usize) -> Result<()> {
    if alloc.power.len() != ues || alloc.cpu.len() != ues {
        return Err(Error::Dimension(format!(
            "allocation has {}/{} entries for {ues} UEs",
            alloc.power.len(),
            alloc.cpu.len()
        )));
    }
    Ok(())
}

/// Bits computed locally by `ue` and the CPU energy spent, over `T - tau0`.
pub fn local_bits_and_energy(params: &SystemParams, alloc: &AllocationState, ue: usize) -> (f64, f64) {
    let window = (params.period - alloc.tau0).max(0.0);
    let f = alloc.cpu[ue].max(0.0);
    (f * window / params.cycles_per_bit[ue], params.kappa * window * f.powi(3))
}

/// Signed constraint residuals; a value `<= 0` means satisfied. Every entry is
/// dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `(consumed - harvested) / harvested` per UE.
    pub energy: Vec<f64>,
    /// `consumed - harvested` per UE, J.
    pub energy_slack: Vec<f64>,
    /// Power box violation relative to `p_max`.
    pub power: Vec<f64>,
    /// CPU box violation relative to `f_max`.
    pub cpu: Vec<f64>,
    /// Time budget violation relative to `T`.
    pub time: f64,
    /// Worst violation of the per-element amplitude constraints.
    pub amplitude: f64,
    /// Worst distance of an uplink amplitude from {0, 1}; only nonzero for MS.
    pub binary: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.energy
            .iter()
            .chain(&self.power)
            .chain(&self.cpu)
            .copied()
            .chain([self.time, self.amplitude, self.binary])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub total_bits: f64,
    pub local_bits: Vec<f64>,
    pub offload_bits: Vec<f64>,
    pub harvested: Vec<f64>,
    pub consumed: Vec<f64>,
    pub residuals: Residuals,
    /// Set when the MS binary assignment constraint is violated.
    pub binary_violation: bool,
}

impl RateReport {
    /// Whether every residual is within `tol`.
    pub fn feasible(&self, tol: f64) -> bool {
        self.residuals.max() <= tol
    }
}

fn normalized_energy(consumed: f64, harvested: f64) -> f64 {
    if harvested > 0.0 {
        (consumed - harvested) / harvested
    } else if consumed > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

fn amplitude_residual(coeffs: &StarCoefficients, protocol: Protocol) -> f64 {
    let mut worst: f64 = coeffs
        .beta
        .iter()
        .flatten()
        .flatten()
        .map(|b| (b - 1.0).max(-b))
        .fold(f64::NEG_INFINITY, f64::max);
    for m in 0..coeffs.elements() {
        worst = worst.max((coeffs.beta[0][0][m] + coeffs.beta[0][1][m] - 1.0).abs());
        let up = if protocol == Protocol::Ts || coeffs.uplink == UplinkOperation::TimeSwitched {
            (coeffs.beta[1][0][m] - 1.0).abs().max((coeffs.beta[1][1][m] - 1.0).abs())
        } else {
            (coeffs.beta[1][0][m] + coeffs.beta[1][1][m] - 1.0).abs()
        };
        worst = worst.max(up);
    }
    worst
}

/// Objective and every constraint residual of an operating point.
/// Infeasibility is reported in the residuals, never as an error.
pub fn evaluate(
    params: &SystemParams,
    channels: &ChannelSet,
    coeffs: &StarCoefficients,
    alloc: &AllocationState,
    protocol: Protocol,
) -> Result<RateReport> {
    let n = channels.num_ues();
    if n == 0 {
        return Err(Error::Dimension("no UEs".into()));
    }
    check_dims(channels, coeffs, 0)?;
    check_alloc(alloc, n)?;
    if params.cycles_per_bit.len() != n {
        return Err(Error::Dimension(format!(
            "{} cycles-per-bit entries for {n} UEs",
            params.cycles_per_bit.len()
        )));
    }
    let gains = uplink_gains(channels, coeffs)?;
    let tau0 = alloc.tau0.clamp(0.0, params.period);

    let mut local_bits = Vec::with_capacity(n);
    let mut offload = Vec::with_capacity(n);
    let mut harvested = Vec::with_capacity(n);
    let mut consumed = Vec::with_capacity(n);
    for i in 0..n {
        let (lb, le) = local_bits_and_energy(params, alloc, i);
        let ob = offload_bits_from_gains(params, &gains, &channels.sides, alloc, protocol, i);
        let window = alloc.offload_window(params, protocol, channels.sides[i]);
        local_bits.push(lb);
        offload.push(ob);
        harvested.push(harvested_energy(params, channels, coeffs, tau0, i)?);
        consumed.push(le + alloc.power[i].max(0.0) * window);
    }
    let total_bits = (0..n).map(|i| local_bits[i] + offload[i]).sum();

    let time_used = match protocol {
        Protocol::Ts => alloc.tau0 + alloc.tau_r + alloc.tau_t,
        Protocol::Es | Protocol::Ms => alloc.tau0,
    };
    let min_time = [alloc.tau0, alloc.tau_r, alloc.tau_t]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let binary = if protocol == Protocol::Ms { coeffs.uplink_binariness() } else { 0.0 };
    let residuals = Residuals {
        energy: (0..n).map(|i| normalized_energy(consumed[i], harvested[i])).collect(),
        energy_slack: (0..n).map(|i| consumed[i] - harvested[i]).collect(),
        power: alloc
            .power
            .iter()
            .map(|p| ((p - params.p_max) / params.p_max).max(-p / params.p_max))
            .collect(),
        cpu: alloc
            .cpu
            .iter()
            .map(|f| ((f - params.f_max) / params.f_max).max(-f / params.f_max))
            .collect(),
        time: ((time_used - params.period) / params.period).max(-min_time / params.period),
        amplitude: amplitude_residual(coeffs, protocol),
        binary,
    };
    Ok(RateReport {
        total_bits,
        local_bits,
        offload_bits: offload,
        harvested,
        consumed,
        binary_violation: binary > 1e-9,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ElementMode, Side};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_channels(m: usize, sides: &[Side], seed: u64) -> ChannelSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = |n: usize| -> Vec<C64> {
            (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
        };
        ChannelSet {
            g_ap_ris: v(m),
            h_ap_ris: v(m),
            g_ris_ue: sides.iter().map(|_| v(m)).collect(),
            h_ris_ue: sides.iter().map(|_| v(m)).collect(),
            sides: sides.to_vec(),
        }
    }

    fn ones(m: usize, sides: &[Side]) -> ChannelSet {
        let one = vec![c(1.0, 0.0); m];
        ChannelSet {
            g_ap_ris: one.clone(),
            h_ap_ris: one.clone(),
            g_ris_ue: vec![one.clone(); sides.len()],
            h_ris_ue: vec![one; sides.len()],
            sides: sides.to_vec(),
        }
    }

    fn random_coeffs(m: usize, seed: u64) -> StarCoefficients {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut co = StarCoefficients::random_phases(m, &mut rng);
        for d in 0..2 {
            for e in 0..m {
                let b: f64 = rng.gen();
                co.beta[d][0][e] = b;
                co.beta[d][1][e] = 1.0 - b;
            }
        }
        co
    }

    #[test]
    fn unit_coefficients_sum_the_elements() {
        let ch = ones(4, &[Side::Reflection]);
        let mut co = StarCoefficients::uniform(4);
        co.beta[1][0] = vec![1.0; 4];
        let h = compose_channel(&ch, &co, 0, Direction::Uplink).unwrap();
        assert!((h - c(4.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_amplitude_blocks_the_beam() {
        let ch = ones(4, &[Side::Reflection]);
        let mut co = StarCoefficients::uniform(4);
        co.beta[1][0] = vec![0.0; 4];
        let h = compose_channel(&ch, &co, 0, Direction::Uplink).unwrap();
        assert_eq!(h, c(0.0, 0.0));
    }

    #[test]
    fn composite_matches_elementwise_sum() {
        let sides = [Side::Reflection, Side::Transmission];
        let ch = random_channels(3, &sides, 11);
        let co = random_coeffs(3, 12);
        for ue in 0..2 {
            let k = sides[ue].index();
            for (d, dir) in Direction::ALL.iter().enumerate() {
                let (ap, uv) = if d == 0 {
                    (&ch.g_ap_ris, &ch.g_ris_ue[ue])
                } else {
                    (&ch.h_ap_ris, &ch.h_ris_ue[ue])
                };
                let mut expect = c(0.0, 0.0);
                for m in 0..3 {
                    let amp = co.beta[d][k][m].sqrt();
                    let ph = co.theta[d][k][m];
                    let coef = c(amp * ph.cos(), amp * ph.sin());
                    expect += uv[m] * coef * ap[m];
                }
                let got = compose_channel(&ch, &co, ue, *dir).unwrap();
                assert!((got - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn composite_rejects_length_mismatch() {
        let ch = ones(4, &[Side::Reflection]);
        let co = StarCoefficients::uniform(3);
        assert!(matches!(
            compose_channel(&ch, &co, 0, Direction::Downlink),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn harvested_energy_direct() {
        let mut params = SystemParams::defaults(1, 1);
        params.ap_power = 1.0;
        let mut ch = ones(1, &[Side::Reflection]);
        ch.g_ap_ris[0] = c(1e-3, 0.0);
        let mut co = StarCoefficients::uniform(1);
        co.beta[0][0] = vec![1.0];
        let e = harvested_energy(&params, &ch, &co, 0.5, 0).unwrap();
        assert!((e - 4e-7).abs() < 1e-20);
        assert_eq!(harvested_energy(&params, &ch, &co, 0.0, 0).unwrap(), 0.0);
        assert!(matches!(
            harvested_energy(&params, &ch, &co, -0.1, 0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn harvested_energy_recomputed() {
        let params = SystemParams::defaults(4, 2);
        let ch = random_channels(4, &[Side::Reflection, Side::Transmission], 5);
        let co = random_coeffs(4, 6);
        for ue in 0..2 {
            let h = compose_channel(&ch, &co, ue, Direction::Downlink).unwrap();
            let expect = 0.8 * 0.3 * 1.0 * (h.re * h.re + h.im * h.im);
            let got = harvested_energy(&params, &ch, &co, 0.3, ue).unwrap();
            assert!((got - expect).abs() <= 1e-15 * expect.abs());
        }
    }

    #[test]
    fn offload_window_closed_at_full_charge() {
        let params = SystemParams::defaults(2, 1);
        let ch = ones(2, &[Side::Reflection]);
        let co = StarCoefficients::uniform(2);
        let mut a = AllocationState::idle(params.period, 1);
        a.power[0] = 0.1;
        assert_eq!(offload_bits(&params, &ch, &co, &a, Protocol::Es, 0).unwrap(), 0.0);
    }

    #[test]
    fn unit_snr_gives_one_bit_per_hertz_second() {
        let params = SystemParams::defaults(1, 1);
        let mut ch = ones(1, &[Side::Reflection]);
        // p |h|^2 / sigma^2 = 0.1 * 1e-7 / 1e-8 = 1
        ch.h_ap_ris[0] = c(1e-7f64.sqrt(), 0.0);
        let mut co = StarCoefficients::uniform(1);
        co.beta[1][0] = vec![1.0];
        let mut a = AllocationState::idle(0.5, 1);
        a.power[0] = 0.1;
        let bits = offload_bits(&params, &ch, &co, &a, Protocol::Es, 0).unwrap();
        assert!((bits - 1e7).abs() < 1e-3, "{bits}");
    }

    #[test]
    fn sinr_by_hand_three_ues() {
        let params = SystemParams::defaults(3, 3);
        let sides = [Side::Reflection, Side::Transmission, Side::Reflection];
        let ch = random_channels(3, &sides, 21);
        let co = random_coeffs(3, 22);
        let a = AllocationState {
            tau0: 0.4,
            tau_r: 0.35,
            tau_t: 0.25,
            power: vec![0.02, 0.05, 0.08],
            cpu: vec![0.0; 3],
        };
        let scale = 1e-6; // make gains comparable to the noise floor
        let ch = ChannelSet {
            h_ap_ris: ch.h_ap_ris.iter().map(|z| z * scale).collect(),
            ..ch
        };
        let g: Vec<f64> = (0..3)
            .map(|i| {
                let k = sides[i].index();
                let mut h = c(0.0, 0.0);
                for m in 0..3 {
                    h += ch.h_ris_ue[i][m]
                        * C64::from_polar(co.beta[1][k][m].sqrt(), co.theta[1][k][m])
                        * ch.h_ap_ris[m];
                }
                h.norm_sqr()
            })
            .collect();
        for i in 0..3 {
            let all: f64 = (0..3).filter(|&j| j != i).map(|j| a.power[j] * g[j]).sum();
            let sinr = a.power[i] * g[i] / (all + 1e-8);
            let es = 0.6 * 20e6 * (1.0 + sinr).log2();
            let got = offload_bits(&params, &ch, &co, &a, Protocol::Es, i).unwrap();
            assert!((got - es).abs() <= 1e-9 * es.max(1.0));

            let same: f64 = (0..3)
                .filter(|&j| j != i && sides[j] == sides[i])
                .map(|j| a.power[j] * g[j])
                .sum();
            let w = if sides[i] == Side::Reflection { 0.35 } else { 0.25 };
            let ts = w * 20e6 * (1.0 + a.power[i] * g[i] / (same + 1e-8)).log2();
            let got = offload_bits(&params, &ch, &co, &a, Protocol::Ts, i).unwrap();
            assert!((got - ts).abs() <= 1e-9 * ts.max(1.0));
        }
    }

    #[test]
    fn local_computing_direct() {
        let params = SystemParams::defaults(1, 1);
        let mut a = AllocationState::idle(0.5, 1);
        a.cpu[0] = 1e9;
        let (bits, energy) = local_bits_and_energy(&params, &a, 0);
        assert!((bits - 5e5).abs() < 1e-6);
        assert!((energy - 5e-2).abs() < 1e-15);
        a.cpu[0] = 0.0;
        assert_eq!(local_bits_and_energy(&params, &a, 0), (0.0, 0.0));
    }

    #[test]
    fn null_allocation_report() {
        let params = SystemParams::defaults(3, 2);
        let ch = random_channels(3, &[Side::Reflection, Side::Transmission], 1);
        let co = random_coeffs(3, 2);
        let a = AllocationState::idle(0.5, 2);
        let r = evaluate(&params, &ch, &co, &a, Protocol::Es).unwrap();
        assert_eq!(r.total_bits, 0.0);
        for i in 0..2 {
            assert_eq!(r.residuals.energy_slack[i], -r.harvested[i]);
            assert_eq!(r.residuals.energy[i], -1.0);
        }
        assert!(!r.binary_violation);
    }

    #[test]
    fn fractional_ms_amplitude_is_flagged() {
        let params = SystemParams::defaults(2, 1);
        let ch = ones(2, &[Side::Reflection]);
        let mut co = StarCoefficients::uniform(2);
        let a = AllocationState::idle(0.5, 1);
        assert!(evaluate(&params, &ch, &co, &a, Protocol::Ms).unwrap().binary_violation);
        co.round_uplink();
        assert!(!evaluate(&params, &ch, &co, &a, Protocol::Ms).unwrap().binary_violation);
    }

    #[test]
    fn report_is_componentwise_sum() {
        let params = SystemParams::defaults(4, 3);
        let sides = [Side::Reflection, Side::Transmission, Side::Transmission];
        let ch = random_channels(4, &sides, 8);
        let ch = ChannelSet { h_ap_ris: ch.h_ap_ris.iter().map(|z| z * 1e-4).collect(), ..ch };
        let co = random_coeffs(4, 9);
        let a = AllocationState {
            tau0: 0.3,
            tau_r: 0.0,
            tau_t: 0.0,
            power: vec![0.01, 0.02, 0.03],
            cpu: vec![1e8, 2e8, 3e8],
        };
        let r = evaluate(&params, &ch, &co, &a, Protocol::Es).unwrap();
        let mut sum = 0.0;
        for i in 0..3 {
            let ob = offload_bits(&params, &ch, &co, &a, Protocol::Es, i).unwrap();
            let (lb, le) = local_bits_and_energy(&params, &a, i);
            assert_eq!(r.offload_bits[i], ob);
            assert_eq!(r.local_bits[i], lb);
            assert!((r.consumed[i] - (le + a.power[i] * 0.7)).abs() < 1e-18);
            sum += lb + ob;
        }
        assert_eq!(r.total_bits, sum);
    }

    #[test]
    fn layouts_keep_amplitude_residual_zero() {
        let params = SystemParams::defaults(2, 1);
        let ch = ones(2, &[Side::Reflection]);
        let mut co = StarCoefficients::uniform(2);
        let a = AllocationState::idle(0.5, 1);
        co.apply_layout(Direction::Uplink, &[ElementMode::ReflectOnly, ElementMode::TransmitOnly]);
        let r = evaluate(&params, &ch, &co, &a, Protocol::Es).unwrap();
        assert!(r.residuals.amplitude.abs() < 1e-15);
        co.apply_layout(Direction::Uplink, &[ElementMode::Unit; 2]);
        let r = evaluate(&params, &ch, &co, &a, Protocol::Ts).unwrap();
        assert!(r.residuals.amplitude.abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn offload_strictly_increasing_in_power(p1 in 1e-4f64..0.05, dp in 1e-4f64..0.05, seed in 0u64..1000) {
            let params = SystemParams::defaults(3, 1);
            let ch = random_channels(3, &[Side::Reflection], seed);
            let ch = ChannelSet { h_ap_ris: ch.h_ap_ris.iter().map(|z| z * 1e-4).collect(), ..ch };
            let co = random_coeffs(3, seed + 1);
            let mut a = AllocationState::idle(0.4, 1);
            a.power[0] = p1;
            let lo = offload_bits(&params, &ch, &co, &a, Protocol::Es, 0).unwrap();
            a.power[0] = p1 + dp;
            let hi = offload_bits(&params, &ch, &co, &a, Protocol::Es, 0).unwrap();
            prop_assert!(hi > lo);
        }

        #[test]
        fn ts_ignores_opposite_side_power(pj in 0.0f64..0.1, seed in 0u64..1000) {
            let params = SystemParams::defaults(3, 2);
            let sides = [Side::Reflection, Side::Transmission];
            let ch = random_channels(3, &sides, seed);
            let ch = ChannelSet { h_ap_ris: ch.h_ap_ris.iter().map(|z| z * 1e-4).collect(), ..ch };
            let co = random_coeffs(3, seed + 7);
            let mut a = AllocationState { tau0: 0.2, tau_r: 0.4, tau_t: 0.4, power: vec![0.05, 0.0], cpu: vec![0.0; 2] };
            let base = offload_bits(&params, &ch, &co, &a, Protocol::Ts, 0).unwrap();
            a.power[1] = pj;
            prop_assert_eq!(offload_bits(&params, &ch, &co, &a, Protocol::Ts, 0).unwrap(), base);
        }

        #[test]
        fn es_interference_never_helps(pj in 0.0f64..0.05, dp in 0.0f64..0.05, seed in 0u64..1000) {
            let params = SystemParams::defaults(3, 2);
            let sides = [Side::Reflection, Side::Transmission];
            let ch = random_channels(3, &sides, seed);
            let ch = ChannelSet { h_ap_ris: ch.h_ap_ris.iter().map(|z| z * 1e-4).collect(), ..ch };
            let co = random_coeffs(3, seed + 3);
            let mut a = AllocationState { tau0: 0.2, tau_r: 0.0, tau_t: 0.0, power: vec![0.05, pj], cpu: vec![0.0; 2] };
            let before = offload_bits(&params, &ch, &co, &a, Protocol::Es, 0).unwrap();
            a.power[1] = pj + dp;
            prop_assert!(offload_bits(&params, &ch, &co, &a, Protocol::Es, 0).unwrap() <= before);
        }

        #[test]
        fn split_surface_conserves_power(seed in 0u64..1000) {
            // Per element the reflected and transmitted powers of a unit
            // incident wave add up to exactly one.
            let co = random_coeffs(6, seed);
            for d in Direction::ALL {
                for m in 0..6 {
                    let r = co.element(d, Side::Reflection, m).norm_sqr();
                    let t = co.element(d, Side::Transmission, m).norm_sqr();
                    prop_assert!((r + t - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
