//! Conventional-surface baseline and brute-force oracles for tiny instances.
//!
//! The grid oracle scans charging times, surface configurations and powers
//! directly on the system model. Two reductions keep the scan small without
//! changing its optimum: a common phase rotation of a beam changes no gain,
//! so the first element of every beam keeps phase zero; and the best total
//! is non-decreasing in every UE's downlink gain and in every UE's uplink
//! gain, so only configurations on the Pareto front of each gain vector are
//! combined. The CPU frequency always spends the energy left after
//! offloading, capped at `f_max`: local bits grow with `f` and no other UE
//! sees it.

use std::f64::consts::{LN_2, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::es::{search_tau0, tau0_grid, SolveOptions, SolveReport, Variant};
use crate::model::{
    interferes, AllocationState, ChannelSet, Direction, ElementMode, Protocol, Side, StarCoefficients,
    SystemParams, UplinkOperation,
};
use crate::{Error, Result, C64};

/// Reflect-only half plus transmit-only half of the same aperture, solved
/// with the energy-splitting pipeline and the same charging-time search.
pub fn conventional_ris_solve(
    params: &SystemParams,
    channels: &ChannelSet,
    step: f64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let variant = Variant::conventional(channels.elements())?;
    search_tau0(params, channels, &variant, step, opts)
}

/// Largest scan `brute_force_small` accepts, in objective evaluations.
pub const BRUTE_FORCE_BUDGET: u64 = 100_000_000;

/// Grid resolution of [`brute_force_small`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteGrids {
    /// Charging times `{step, 2 step, ...}` inside `(0, T)`.
    pub tau0_step: f64,
    /// Phase points per element on `[0, 2 pi)`.
    pub phase_points: usize,
    /// Split points per element on `[0, 1]` (energy splitting only).
    pub amplitude_points: usize,
    /// Power points per UE on `[0, p_cap]`.
    pub power_points: usize,
    /// Reflection-slot points on `[0, T - tau0]` (time switching only).
    pub slot_points: usize,
    /// Scan charging times on the rayon pool.
    pub parallel: bool,
}

impl Default for BruteGrids {
    fn default() -> Self {
        BruteGrids {
            tau0_step: 0.05,
            phase_points: 16,
            amplitude_points: 11,
            power_points: 48,
            slot_points: 21,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    /// Total bits at the best grid point.
    pub value: f64,
    pub alloc: AllocationState,
    pub coeffs: StarCoefficients,
    /// Objective evaluations performed (surface scans included).
    pub evaluations: u64,
}

/// One direction's configuration and the gain it gives every UE.
#[derive(Debug, Clone)]
struct Config {
    beta: [Vec<f64>; 2],
    theta: [Vec<f64>; 2],
    gains: Vec<f64>,
}

fn grid(points: usize, lo: f64, hi: f64) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![hi],
        n => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Every combination of `choices[k]` over `k`, first index slowest.
fn product<T: Clone>(choices: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for c in choices {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                c.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect();
    }
    out
}

/// Amplitude pairs `[beta_r, beta_t]` one element may take.
fn amplitude_choices(protocol: Protocol, direction: Direction, points: usize) -> Vec<[f64; 2]> {
    match (protocol, direction) {
        (Protocol::Ts, Direction::Uplink) => vec![[1.0, 1.0]],
        (Protocol::Ms, Direction::Uplink) => vec![[1.0, 0.0], [0.0, 1.0]],
        _ => grid(points, 0.0, 1.0).into_iter().map(|b| [b, 1.0 - b]).collect(),
    }
}

fn configs(
    channels: &ChannelSet,
    protocol: Protocol,
    direction: Direction,
    grids: &BruteGrids,
) -> Vec<Config> {
    let m = channels.elements();
    let n = channels.num_ues();
    let cascades: Vec<Vec<C64>> = (0..n).map(|i| channels.cascade(i, direction)).collect();
    let amps = product(&vec![amplitude_choices(protocol, direction, grids.amplitude_points); m]);
    let step = TAU / grids.phase_points as f64;
    let one: Vec<f64> = (0..grids.phase_points).map(|k| k as f64 * step).collect();
    let mut phase_axes = vec![vec![0.0]];
    phase_axes.extend(std::iter::repeat(one).take(m.saturating_sub(1)));
    let phases = product(&phase_axes);
    let mut out = Vec::with_capacity(amps.len() * phases.len() * phases.len());
    for a in &amps {
        let beta = [a.iter().map(|p| p[0]).collect::<Vec<_>>(), a.iter().map(|p| p[1]).collect::<Vec<_>>()];
        for pr in &phases {
            for pt in &phases {
                let theta = [pr.clone(), pt.clone()];
                let gains = (0..n)
                    .map(|i| {
                        let k = channels.sides[i].index();
                        let s: C64 = (0..m)
                            .map(|e| cascades[i][e] * C64::from_polar(beta[k][e].sqrt(), theta[k][e]))
                            .sum();
                        s.norm_sqr()
                    })
                    .collect();
                out.push(Config { beta: beta.clone(), theta, gains });
            }
        }
    }
    out
}

/// Configurations whose gain vector no other configuration dominates; ties
/// keep the first in scan order.
fn pareto(configs: Vec<Config>) -> Vec<Config> {
    let mut keep: Vec<Config> = Vec::new();
    for c in configs {
        let dominated = keep.iter().any(|k| k.gains.iter().zip(&c.gains).all(|(a, b)| a >= b));
        if dominated {
            continue;
        }
        keep.retain(|k| !c.gains.iter().zip(&k.gains).all(|(a, b)| a >= b));
        keep.push(c);
    }
    keep
}

struct Scan<'a> {
    params: &'a SystemParams,
    sides: &'a [Side],
    protocol: Protocol,
    power_points: usize,
}

struct Best {
    value: f64,
    down: usize,
    up: usize,
    alloc: AllocationState,
}

impl Scan<'_> {
    /// Best powers for fixed gains, charging time and slots.
    fn powers(&self, tau0: f64, slots: (f64, f64), down: &[f64], up: &[f64], evaluations: &mut u64) -> (f64, AllocationState) {
        let p = self.params;
        let n = self.sides.len();
        let local = p.period - tau0;
        let windows: Vec<f64> = self
            .sides
            .iter()
            .map(|s| match (self.protocol, s) {
                (Protocol::Ts, Side::Reflection) => slots.0,
                (Protocol::Ts, Side::Transmission) => slots.1,
                _ => local,
            })
            .collect();
        let energy: Vec<f64> = down.iter().map(|g| p.eta * tau0 * p.ap_power * g).collect();
        let axes: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let cap = if windows[i] > 0.0 { p.p_max.min(energy[i] / windows[i]) } else { 0.0 };
                if cap > 0.0 && up[i] > 0.0 {
                    grid(self.power_points, 0.0, cap)
                } else {
                    vec![0.0]
                }
            })
            .collect();
        let mut best = (f64::NEG_INFINITY, AllocationState::idle(tau0, n));
        for power in product(&axes) {
            *evaluations += 1;
            let mut total = 0.0;
            let mut cpu = vec![0.0; n];
            for i in 0..n {
                let rest = (energy[i] - power[i] * windows[i]).max(0.0);
                cpu[i] = (rest / (p.kappa * local)).cbrt().min(p.f_max);
                total += cpu[i] * local / p.cycles_per_bit[i];
                if windows[i] > 0.0 && power[i] > 0.0 {
                    let interference: f64 = (0..n)
                        .filter(|&j| interferes(self.protocol, self.sides, i, j))
                        .map(|j| power[j] * up[j])
                        .sum();
                    let sinr = power[i] * up[i] / (p.noise_power + interference);
                    total += windows[i] * p.bandwidth * sinr.ln_1p() / LN_2;
                }
            }
            if total > best.0 {
                let (tau_r, tau_t) = if self.protocol == Protocol::Ts { slots } else { (0.0, 0.0) };
                best = (total, AllocationState { tau0, tau_r, tau_t, power, cpu });
            }
        }
        best
    }
}

/// Exhaustive grid optimum of a tiny instance (`I <= 2`, `M <= 2`).
pub fn brute_force_small(
    params: &SystemParams,
    channels: &ChannelSet,
    protocol: Protocol,
    grids: &BruteGrids,
) -> Result<BruteForceResult> {
    params.validate()?;
    channels.check()?;
    let n = channels.num_ues();
    let m = channels.elements();
    if n > 2 || m > 2 {
        return Err(Error::Config(format!("brute force supports I <= 2 and M <= 2, got I = {n}, M = {m}")));
    }
    if grids.phase_points == 0 || grids.amplitude_points == 0 || grids.power_points == 0 || grids.slot_points == 0 {
        return Err(Error::Config("every grid needs at least one point".into()));
    }
    let taus = tau0_grid(params.period, grids.tau0_step)?;
    let per_side = |d: Direction| -> u64 {
        let a = amplitude_choices(protocol, d, grids.amplitude_points).len() as u64;
        let ph = (grids.phase_points as u64).pow(m.saturating_sub(1) as u32);
        a.pow(m as u32) * ph * ph
    };
    let surface = per_side(Direction::Downlink) + per_side(Direction::Uplink);
    if surface > BRUTE_FORCE_BUDGET {
        return Err(Error::Config(format!("surface grid of {surface} points exceeds the budget")));
    }
    let down = pareto(configs(channels, protocol, Direction::Downlink, grids));
    let up = pareto(configs(channels, protocol, Direction::Uplink, grids));
    let slots = if protocol == Protocol::Ts { grids.slot_points as u64 } else { 1 };
    let combos = taus.len() as u64
        * down.len() as u64
        * up.len() as u64
        * slots
        * (grids.power_points as u64).pow(n as u32);
    if surface + combos > BRUTE_FORCE_BUDGET {
        return Err(Error::Config(format!("grid of {} points exceeds the budget of {BRUTE_FORCE_BUDGET}", surface + combos)));
    }

    let scan = Scan { params, sides: &channels.sides, protocol, power_points: grids.power_points };
    let at = |tau0: &f64| -> (Best, u64) {
        let mut evaluations = 0;
        let mut best = Best { value: f64::NEG_INFINITY, down: 0, up: 0, alloc: AllocationState::idle(*tau0, n) };
        let rest = params.period - tau0;
        let slot_grid: Vec<(f64, f64)> = if protocol == Protocol::Ts {
            grid(grids.slot_points, 0.0, rest).into_iter().map(|r| (r, (rest - r).max(0.0))).collect()
        } else {
            vec![(0.0, 0.0)]
        };
        for (d, dc) in down.iter().enumerate() {
            for (u, uc) in up.iter().enumerate() {
                for s in &slot_grid {
                    let (value, alloc) = scan.powers(*tau0, *s, &dc.gains, &uc.gains, &mut evaluations);
                    if value > best.value {
                        best = Best { value, down: d, up: u, alloc };
                    }
                }
            }
        }
        (best, evaluations)
    };
    let per_tau: Vec<(Best, u64)> =
        if grids.parallel { taus.par_iter().map(at).collect() } else { taus.iter().map(at).collect() };

    let mut evaluations = surface;
    let mut winner: Option<Best> = None;
    for (b, e) in per_tau {
        evaluations += e;
        // Strict improvement: ties keep the earlier charging time.
        if winner.as_ref().map_or(true, |w| b.value > w.value) {
            winner = Some(b);
        }
    }
    let best = winner.ok_or_else(|| Error::Config("empty charging-time grid".into()))?;
    let mut coeffs = StarCoefficients::uniform(m);
    for (d, c) in [(0, &down[best.down]), (1, &up[best.up])] {
        coeffs.beta[d] = c.beta.clone();
        coeffs.theta[d] = c.theta.clone();
    }
    if protocol == Protocol::Ts {
        coeffs.uplink = UplinkOperation::TimeSwitched;
    }
    Ok(BruteForceResult { value: best.value, alloc: best.alloc, coeffs, evaluations })
}

/// Per-pattern optimum of every binary uplink assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternOracle {
    /// Best total over all patterns.
    pub value: f64,
    /// Winning pattern; `true` reflects.
    pub pattern: Vec<bool>,
    /// Total of every pattern, pattern `k` reflecting on the set bits of `k`.
    pub totals: Vec<f64>,
}

/// Largest element count [`binary_pattern_oracle`] accepts.
pub const PATTERN_ORACLE_MAX_ELEMENTS: usize = 4;

/// Mode-switching oracle: fix every one of the `2^M` reflect/transmit uplink
/// patterns, optimize the rest with the energy-splitting pipeline (the
/// downlink stays free) and keep the best.
pub fn binary_pattern_oracle(
    params: &SystemParams,
    channels: &ChannelSet,
    step: f64,
    opts: &SolveOptions,
) -> Result<PatternOracle> {
    let m = channels.elements();
    if m > PATTERN_ORACLE_MAX_ELEMENTS {
        return Err(Error::Config(format!(
            "pattern enumeration supports M <= {PATTERN_ORACLE_MAX_ELEMENTS}, got {m}"
        )));
    }
    let mut totals = Vec::with_capacity(1 << m);
    for k in 0..(1usize << m) {
        let uplink = (0..m)
            .map(|e| if k >> e & 1 == 1 { ElementMode::ReflectOnly } else { ElementMode::TransmitOnly })
            .collect();
        let variant = Variant { protocol: Protocol::Es, downlink: vec![ElementMode::Split; m], uplink };
        totals.push(search_tau0(params, channels, &variant, step, opts)?.total_bits());
    }
    let mut best = 0;
    for (k, t) in totals.iter().enumerate() {
        if *t > totals[best] {
            best = k;
        }
    }
    Ok(PatternOracle { value: totals[best], pattern: (0..m).map(|e| best >> e & 1 == 1).collect(), totals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate, Geometry, PathLossParams};
    use crate::model::evaluate;

    fn tiny(ues: usize, elements: usize, seed: u64) -> (SystemParams, ChannelSet) {
        let params = SystemParams::defaults(elements, ues);
        let placement = Geometry::default().place(ues, seed);
        let channels = generate(&params, &placement, &PathLossParams { seed, ..Default::default() }).unwrap();
        (params, channels)
    }

    fn coarse() -> BruteGrids {
        BruteGrids {
            tau0_step: 0.25,
            phase_points: 4,
            amplitude_points: 3,
            power_points: 6,
            slot_points: 3,
            parallel: false,
        }
    }

    #[test]
    fn reported_value_matches_the_model() {
        for protocol in [Protocol::Es, Protocol::Ms, Protocol::Ts] {
            let (params, channels) = tiny(2, 2, 3);
            let r = brute_force_small(&params, &channels, protocol, &coarse()).unwrap();
            let rep = evaluate(&params, &channels, &r.coeffs, &r.alloc, protocol).unwrap();
            assert!((rep.total_bits - r.value).abs() <= 1e-9 * r.value, "{protocol:?}");
            assert!(rep.feasible(1e-9), "{protocol:?}");
        }
    }

    #[test]
    fn single_point_grid_evaluates_that_point() {
        let (params, channels) = tiny(1, 1, 1);
        let grids = BruteGrids {
            tau0_step: 0.5,
            phase_points: 1,
            amplitude_points: 1,
            power_points: 1,
            slot_points: 1,
            parallel: false,
        };
        let r = brute_force_small(&params, &channels, Protocol::Es, &grids).unwrap();
        assert_eq!(r.alloc.tau0, 0.5);
        // One amplitude point is the all-reflect split; the UE's side decides
        // whether it harvests anything.
        let rep = evaluate(&params, &channels, &r.coeffs, &r.alloc, Protocol::Es).unwrap();
        assert!((rep.total_bits - r.value).abs() <= 1e-9 * r.value.max(1.0));
        assert_eq!(r.evaluations, 1 + 1 + 1);
    }

    #[test]
    fn refined_grid_never_loses() {
        let (params, channels) = tiny(1, 2, 5);
        let coarse = coarse();
        let fine = BruteGrids {
            tau0_step: 0.125,
            phase_points: 8,
            amplitude_points: 5,
            power_points: 11,
            slot_points: 5,
            ..coarse.clone()
        };
        for protocol in [Protocol::Es, Protocol::Ts] {
            let a = brute_force_small(&params, &channels, protocol, &coarse).unwrap();
            let b = brute_force_small(&params, &channels, protocol, &fine).unwrap();
            assert!(b.value >= a.value * (1.0 - 1e-12), "{protocol:?}: {} < {}", b.value, a.value);
        }
    }

    #[test]
    fn oversized_instances_are_rejected() {
        let (params, channels) = tiny(3, 2, 1);
        assert!(matches!(brute_force_small(&params, &channels, Protocol::Es, &coarse()), Err(Error::Config(_))));
        let (params, channels) = tiny(1, 2, 1);
        let huge = BruteGrids { phase_points: 4096, amplitude_points: 101, ..coarse() };
        assert!(matches!(brute_force_small(&params, &channels, Protocol::Es, &huge), Err(Error::Config(_))));
        let (params, channels) = tiny(1, 5, 1);
        assert!(matches!(
            binary_pattern_oracle(&params, &channels, 0.5, &SolveOptions::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn dead_links_give_zero() {
        let (params, channels) = tiny(2, 2, 2);
        let r = brute_force_small(&params, &channels.zeroed(), Protocol::Es, &coarse()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn conventional_needs_even_elements() {
        let (params, channels) = tiny(1, 3, 1);
        assert!(matches!(
            conventional_ris_solve(&params, &channels, 0.5, &SolveOptions::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn pareto_front_drops_dominated_vectors() {
        let c = |g: [f64; 2]| Config { beta: [vec![], vec![]], theta: [vec![], vec![]], gains: g.to_vec() };
        let front = pareto(vec![c([1.0, 1.0]), c([2.0, 0.5]), c([0.5, 0.5]), c([2.0, 1.0]), c([0.0, 3.0])]);
        let gains: Vec<Vec<f64>> = front.iter().map(|k| k.gains.clone()).collect();
        assert_eq!(gains, vec![vec![2.0, 1.0], vec![0.0, 3.0]]);
    }
}
