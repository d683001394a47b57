//! Time-switching protocol: the surface serves the reflection side, then the
//! transmission side, with unit amplitudes in the active mode. The two slot
//! lengths come from a linear program at fixed powers and frequencies; the
//! charging time is searched on a grid.

use crate::es::{repair_allocation, search_tau0, SolveOptions, SolveReport, Variant};
use crate::kernel::{solve_lp, LpProblem};
use crate::model::{
    channel_gain, evaluate, offload_bits_from_gains, AllocationState, ChannelSet, Direction, Protocol, Side,
    StarCoefficients, SystemParams,
};
use crate::{Error, Result};

/// Linear program over `(tau0, tau_r, tau_t)` for fixed `p`, `f` and
/// coefficients. The objective omits the constant `sum_i f_i T / C_i`; see
/// [`local_constant`]. Each UE gets its own energy row, with harvest scaled
/// by `1 - margin`. `pin` fixes `tau0`.
pub fn build_time_lp(
    params: &SystemParams,
    channels: &ChannelSet,
    coeffs: &StarCoefficients,
    power: &[f64],
    cpu: &[f64],
    margin: f64,
    pin: Option<f64>,
) -> Result<LpProblem> {
    let n = channels.num_ues();
    if power.len() != n || cpu.len() != n || params.cycles_per_bit.len() != n {
        return Err(Error::Dimension("allocation length differs from UE count".into()));
    }
    let gains: Vec<f64> =
        (0..n).map(|i| channel_gain(channels, coeffs, i, Direction::Uplink)).collect::<Result<_>>()?;
    // Offloaded bits per second of slot: the window enters linearly.
    let unit = AllocationState { tau0: 0.0, tau_r: 1.0, tau_t: 1.0, power: power.to_vec(), cpu: cpu.to_vec() };
    let mut objective = vec![0.0; 3];
    for i in 0..n {
        objective[0] -= cpu[i] / params.cycles_per_bit[i];
        let rate = offload_bits_from_gains(params, &gains, &channels.sides, &unit, Protocol::Ts, i);
        objective[1 + channels.sides[i].index()] += rate;
    }
    let mut constraints = Vec::with_capacity(n + 1);
    let mut bounds = Vec::with_capacity(n + 1);
    for i in 0..n {
        let local_power = params.kappa * cpu[i].powi(3);
        let harvest_rate = (1.0 - margin)
            * params.eta
            * params.ap_power
            * channel_gain(channels, coeffs, i, Direction::Downlink)?;
        let mut row = vec![-(local_power + harvest_rate), 0.0, 0.0];
        row[1 + channels.sides[i].index()] = power[i];
        constraints.push(row);
        bounds.push(-local_power * params.period);
    }
    constraints.push(vec![1.0; 3]);
    bounds.push(params.period);
    if let Some(t) = pin {
        constraints.push(vec![1.0, 0.0, 0.0]);
        bounds.push(t);
        constraints.push(vec![-1.0, 0.0, 0.0]);
        bounds.push(-t);
    }
    Ok(LpProblem { objective, constraints, bounds })
}

/// Local bits the LP objective leaves out.
pub fn local_constant(params: &SystemParams, cpu: &[f64]) -> f64 {
    cpu.iter().zip(&params.cycles_per_bit).map(|(f, c)| f * params.period / c).sum()
}

/// Initial slots: `T - tau0` shared between the sides in proportion to
/// their populations.
pub fn initial_slots(params: &SystemParams, sides: &[Side], tau0: f64) -> (f64, f64) {
    let rest = (params.period - tau0).max(0.0);
    let r = sides.iter().filter(|s| **s == Side::Reflection).count() as f64;
    let total = sides.len() as f64;
    if total == 0.0 {
        return (rest / 2.0, rest / 2.0);
    }
    (rest * r / total, rest * (total - r) / total)
}

/// Time-switching optimum over the charging-time grid.
pub fn solve_ts(params: &SystemParams, channels: &ChannelSet, step: f64, opts: &SolveOptions) -> Result<SolveReport> {
    search_tau0(params, channels, &Variant::star(Protocol::Ts, channels.elements()), step, opts)
}

/// Replace the slot lengths by the LP optimum at the current `tau0` when it
/// is at least as good as the current split.
pub(crate) fn time_step(
    params: &SystemParams,
    channels: &ChannelSet,
    coeffs: &StarCoefficients,
    alloc: &mut AllocationState,
    margin: f64,
) -> Result<()> {
    let lp = build_time_lp(params, channels, coeffs, &alloc.power, &alloc.cpu, margin, Some(alloc.tau0))?;
    let sol = solve_lp(&lp)?;
    let mut next = alloc.clone();
    next.tau_r = sol.x[1].max(0.0);
    next.tau_t = sol.x[2].max(0.0);
    let over = next.tau0 + next.tau_r + next.tau_t - params.period;
    if over > 0.0 {
        // Round-off only; trim the slots.
        let s = (params.period - next.tau0) / (next.tau_r + next.tau_t);
        next.tau_r *= s;
        next.tau_t *= s;
    }
    // The vertex may sit on the energy rows up to round-off.
    repair_allocation(params, channels, coeffs, &mut next, Protocol::Ts, margin)?;
    let now = evaluate(params, channels, coeffs, alloc, Protocol::Ts)?.total_bits;
    let then = evaluate(params, channels, coeffs, &next, Protocol::Ts)?.total_bits;
    if then >= now {
        *alloc = next;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate, Geometry, PathLossParams};

    fn instance(seed: u64) -> (SystemParams, ChannelSet, StarCoefficients) {
        let params = SystemParams::defaults(4, 3);
        let placement = Geometry::default().place(3, seed);
        let channels = generate(&params, &placement, &PathLossParams { seed, ..Default::default() }).unwrap();
        let coeffs = crate::es::initial_coefficients(&Variant::star(Protocol::Ts, 4), seed);
        (params, channels, coeffs)
    }

    #[test]
    fn slots_follow_side_populations() {
        let sides = [Side::Reflection, Side::Transmission, Side::Reflection];
        let (r, t) = initial_slots(&SystemParams::defaults(2, 3), &sides, 0.4);
        assert!((r - 0.4).abs() < 1e-15 && (t - 0.2).abs() < 1e-15);
        assert_eq!(initial_slots(&SystemParams::defaults(2, 0), &[], 0.5), (0.25, 0.25));
    }

    #[test]
    fn lp_objective_plus_local_constant_is_the_model_total() {
        for seed in 0..5 {
            let (params, channels, coeffs) = instance(seed);
            let alloc = AllocationState {
                tau0: 0.3,
                tau_r: 0.45,
                tau_t: 0.25,
                power: vec![1e-4, 2e-4, 5e-5],
                cpu: vec![1e8, 2e8, 3e8],
            };
            let lp = build_time_lp(&params, &channels, &coeffs, &alloc.power, &alloc.cpu, 0.0, None).unwrap();
            let x = [alloc.tau0, alloc.tau_r, alloc.tau_t];
            let lin: f64 = lp.objective.iter().zip(x).map(|(a, b)| a * b).sum();
            let total = evaluate(&params, &channels, &coeffs, &alloc, Protocol::Ts).unwrap().total_bits;
            let got = lin + local_constant(&params, &alloc.cpu);
            assert!((got - total).abs() <= 1e-9 * total, "seed {seed}: {got} vs {total}");
        }
    }

    #[test]
    fn pinned_rows_fix_the_charging_time() {
        let (params, channels, coeffs) = instance(1);
        let lp = build_time_lp(&params, &channels, &coeffs, &[0.0; 3], &[0.0; 3], 0.0, Some(0.35)).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.x[0] - 0.35).abs() < 1e-9);
        assert!(build_time_lp(&params, &channels, &coeffs, &[0.0; 2], &[0.0; 3], 0.0, None).is_err());
    }

    #[test]
    fn time_step_never_loses_and_keeps_the_budget() {
        for seed in 0..5 {
            let (params, channels, coeffs) = instance(seed);
            let mut idle = AllocationState::idle(0.4, 3);
            (idle.tau_r, idle.tau_t) = initial_slots(&params, &channels.sides, 0.4);
            let mut alloc =
                crate::es::initial_allocation(&params, &channels, &coeffs, idle, Protocol::Ts, 1e-4).unwrap();
            let before = evaluate(&params, &channels, &coeffs, &alloc, Protocol::Ts).unwrap().total_bits;
            time_step(&params, &channels, &coeffs, &mut alloc, 1e-4).unwrap();
            let after = evaluate(&params, &channels, &coeffs, &alloc, Protocol::Ts).unwrap();
            assert!(after.total_bits >= before, "seed {seed}");
            assert!((alloc.tau0 - 0.4).abs() < 1e-12);
            assert!(alloc.tau0 + alloc.tau_r + alloc.tau_t <= params.period * (1.0 + 1e-12));
            assert!(after.feasible(1e-9), "seed {seed}: {:?}", after.residuals);
        }
    }
}
