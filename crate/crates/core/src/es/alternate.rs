//! Alternation of the resource and coefficient steps at a fixed charging
//! time, and the linear search over charging times.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coeff::{coeff_step_warm, CoeffWarmStart};
use super::options::{SolveOptions, Variant};
use super::resource::{resource_step, ResourceSubproblem};
use crate::model::{
    evaluate, harvested_energy, AllocationState, ChannelSet, Direction, Protocol, RateReport, StarCoefficients,
    SystemParams,
};
use crate::{Error, Result};

/// Result of one optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub protocol: Protocol,
    pub alloc: AllocationState,
    pub coeffs: StarCoefficients,
    /// True objective and residuals at the returned point.
    pub report: RateReport,
    /// Total bits after every alternation round, starting at the initial
    /// point; the last entry follows the closing resource step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest relative rank-one residual of the last coefficient SDP.
    pub rank_residual: Option<f64>,
    /// Total bits predicted by the last coefficient SDP.
    pub sdp_total_bits: Option<f64>,
    /// True total bits at the point extracted from that SDP, at the
    /// allocation the SDP was built for.
    pub extracted_total_bits: Option<f64>,
    /// Uplink binariness before rounding (mode switching only).
    pub binariness: Option<f64>,
    pub sdp_solves: usize,
    /// `(tau0, total bits)` for every searched charging time.
    pub curve: Vec<(f64, f64)>,
}

impl SolveReport {
    pub fn total_bits(&self) -> f64 {
        self.report.total_bits
    }
}

/// Even split, random phases, structural layout applied; mode switching
/// starts from the rounded assignment.
pub fn initial_coefficients(variant: &Variant, seed: u64) -> StarCoefficients {
    let mut c = StarCoefficients::random_phases(variant.elements(), &mut ChaCha8Rng::seed_from_u64(seed));
    c.apply_layout(Direction::Downlink, &variant.downlink);
    c.apply_layout(Direction::Uplink, &variant.uplink);
    if variant.binary_uplink() {
        c.round_uplink();
    }
    c
}

/// Offload with all the usable energy the power cap allows, compute locally
/// with the rest.
pub fn initial_allocation(
    params: &SystemParams,
    channels: &ChannelSet,
    coeffs: &StarCoefficients,
    mut alloc: AllocationState,
    protocol: Protocol,
    margin: f64,
) -> Result<AllocationState> {
    let n = channels.num_ues();
    let local = (params.period - alloc.tau0).max(0.0);
    alloc.power = vec![0.0; n];
    alloc.cpu = vec![0.0; n];
    for i in 0..n {
        let budget = (1.0 - margin) * harvested_energy(params, channels, coeffs, alloc.tau0, i)?;
        let window = alloc.offload_window(params, protocol, channels.sides[i]);
        let p = if window > 0.0 { (budget / window).min(params.p_max) } else { 0.0 };
        let rest = (budget - p * window).max(0.0);
        alloc.power[i] = p;
        alloc.cpu[i] = if local > 0.0 { (rest / (params.kappa * local)).cbrt().min(params.f_max) } else { 0.0 };
    }
    Ok(alloc)
}

/// Shrink `(p, f)` of any UE whose consumption exceeds its usable energy.
/// Only solver round-off can trigger this.
pub(crate) fn repair_allocation(
    params: &SystemParams,
    channels: &ChannelSet,
    coeffs: &StarCoefficients,
    alloc: &mut AllocationState,
    protocol: Protocol,
    margin: f64,
) -> Result<()> {
    let sp = ResourceSubproblem::new(params, channels, coeffs, alloc, protocol, margin)?;
    for i in 0..channels.num_ues() {
        let used = sp.consumption(i, &alloc.power, &alloc.cpu);
        if used > sp.budgets[i] {
            let s = if used > 0.0 { sp.budgets[i].max(0.0) / used } else { 0.0 };
            alloc.power[i] *= s;
            alloc.cpu[i] *= s.cbrt();
        }
    }
    Ok(())
}

pub(crate) fn finish(
    params: &SystemParams,
    channels: &ChannelSet,
    variant: &Variant,
    alloc: AllocationState,
    coeffs: StarCoefficients,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    last: Option<&super::CoeffOutcome>,
    sdp_solves: usize,
) -> Result<SolveReport> {
    let report = evaluate(params, channels, &coeffs, &alloc, variant.protocol)?;
    Ok(SolveReport {
        protocol: variant.protocol,
        alloc,
        coeffs,
        report,
        trace,
        iterations,
        converged,
        rank_residual: last.and_then(|o| o.rank_residual),
        sdp_total_bits: last.and_then(|o| o.sdp_total_bits),
        extracted_total_bits: last.and_then(|o| o.extracted_total_bits),
        binariness: last.and_then(|o| o.binariness),
        sdp_solves,
        curve: Vec::new(),
    })
}

/// Alternate resource and coefficient steps at a fixed `tau0` until the total
/// changes by at most `delta` (relative) or `max_iterations` rounds pass.
/// Under time switching every round starts with the slot LP, which splits
/// `T - tau0` between the two sides.
pub fn alternate(
    params: &SystemParams,
    channels: &ChannelSet,
    variant: &Variant,
    tau0: f64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    params.validate()?;
    channels.check()?;
    if variant.elements() != channels.elements() {
        return Err(Error::Dimension("variant and channels disagree on the element count".into()));
    }
    if !(tau0 > 0.0 && tau0 < params.period) {
        return Err(Error::Domain(format!("charging time {tau0} outside (0, {})", params.period)));
    }
    let protocol = variant.protocol;
    let margin = opts.energy_margin;
    let mut coeffs = initial_coefficients(variant, opts.init_seed);
    let n = channels.num_ues();
    let mut idle = AllocationState::idle(tau0, n);
    if protocol == Protocol::Ts {
        (idle.tau_r, idle.tau_t) = crate::ts::initial_slots(params, &channels.sides, tau0);
    }
    let mut alloc = initial_allocation(params, channels, &coeffs, idle, protocol, margin)?;
    let total = |c: &StarCoefficients, a: &AllocationState| evaluate(params, channels, c, a, protocol).map(|r| r.total_bits);
    let mut value = total(&coeffs, &alloc)?;
    let mut trace = vec![value];
    let mut converged = false;
    let mut iterations = 0;
    let mut solves = 0;
    // Aim the surface at the start, where every UE offloads its whole
    // budget, so no UE begins with a beam that makes offloading look useless.
    let mut carry = CoeffWarmStart::default();
    let step = coeff_step_warm(params, channels, &alloc, &coeffs, variant, opts, &mut carry)?;
    solves += step.sdp_solves;
    coeffs = step.coeffs.clone();
    let mut last = Some(step);
    repair_allocation(params, channels, &coeffs, &mut alloc, protocol, margin)?;
    value = total(&coeffs, &alloc)?;
    trace.push(value);
    while iterations < params.max_iterations {
        iterations += 1;
        if protocol == Protocol::Ts {
            crate::ts::time_step(params, channels, &coeffs, &mut alloc, margin)?;
        }
        let res = resource_step(params, channels, &coeffs, &alloc, protocol, margin, &opts.settings)?;
        alloc.power = res.power;
        alloc.cpu = res.cpu;
        let step = coeff_step_warm(params, channels, &alloc, &coeffs, variant, opts, &mut carry)?;
        solves += step.sdp_solves;
        coeffs = step.coeffs.clone();
        last = Some(step);
        repair_allocation(params, channels, &coeffs, &mut alloc, protocol, margin)?;
        let next = total(&coeffs, &alloc)?;
        trace.push(next);
        let change = (next - value).abs();
        value = next;
        if change <= params.delta * value.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    // Spend whatever the last coefficient step freed up.
    let res = resource_step(params, channels, &coeffs, &alloc, protocol, margin, &opts.settings)?;
    alloc.power = res.power;
    alloc.cpu = res.cpu;
    trace.push(total(&coeffs, &alloc)?);
    finish(params, channels, variant, alloc, coeffs, trace, iterations, converged, last.as_ref(), solves)
}

/// Energy-splitting alternation at a fixed charging time.
pub fn alternate_es(params: &SystemParams, channels: &ChannelSet, tau0: f64, opts: &SolveOptions) -> Result<SolveReport> {
    alternate(params, channels, &Variant::star(Protocol::Es, channels.elements()), tau0, opts)
}

/// Interior grid `{step, 2 step, ...}` strictly inside `(0, period)`.
pub fn tau0_grid(period: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step < period) {
        return Err(Error::Domain(format!("search step {step} outside (0, {period})")));
    }
    let mut out = Vec::new();
    let mut k = 1u64;
    loop {
        // Rounded so grid points print as the decimals they stand for.
        let t = (k as f64 * step * 1e9).round() / 1e9;
        // Grid points within round-off of the period are the endpoint.
        if t >= period * (1.0 - 1e-9) {
            break;
        }
        out.push(t);
        k += 1;
    }
    Ok(out)
}

/// Run `alternate` at every grid charging time and keep the best; ties go to
/// the smallest `tau0`.
pub fn search_tau0(
    params: &SystemParams,
    channels: &ChannelSet,
    variant: &Variant,
    step: f64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let grid = tau0_grid(params.period, step)?;
    let run = |t: &f64| alternate(params, channels, variant, *t, opts);
    let runs: Vec<Result<SolveReport>> =
        if opts.parallel { grid.par_iter().map(run).collect() } else { grid.iter().map(run).collect() };
    let runs: Vec<SolveReport> = runs.into_iter().collect::<Result<_>>()?;
    let curve: Vec<(f64, f64)> = grid.iter().zip(&runs).map(|(t, r)| (*t, r.total_bits())).collect();
    let mut best = 0;
    for (k, r) in runs.iter().enumerate() {
        if r.total_bits() > runs[best].total_bits() {
            best = k;
        }
    }
    let mut out = runs.into_iter().nth(best).expect("grid is non-empty");
    out.curve = curve;
    Ok(out)
}

/// Energy-splitting optimum over the charging-time grid.
pub fn search_tau0_es(params: &SystemParams, channels: &ChannelSet, step: f64, opts: &SolveOptions) -> Result<SolveReport> {
    search_tau0(params, channels, &Variant::star(Protocol::Es, channels.elements()), step, opts)
}
