//! Coefficient step: semidefinite relaxation of the surface configuration for
//! fixed powers, CPU frequencies and time split.
//!
//! Every beam is lifted to a PSD matrix `V = u u^H`. The uplink and downlink
//! beams share no variables and are solved as separate SDPs. The uplink SDP
//! replaces each UE's rate by its tangent-plane lower bound in the auxiliary
//! variables `(A, B)` and is re-solved around its own solution (minorize then
//! maximize). The downlink SDP maximizes the bits each UE can make of its
//! harvested energy, a concave function represented by tangent planes, while
//! never harvesting less than the UE already spends. Each direction ends with
//! a pass that linearizes the spectral norm at the best rank-one point and
//! adds the rank-one constraint `Tr(V) - u^H V u <= eps`.
//!
//! Every pass ends with rank-one extraction; an extracted point replaces the
//! incumbent only if its true objective is better, so the step never loses
//! ground.

use std::f64::consts::{LN_2, LOG2_E, TAU};

use super::options::{SolveOptions, Variant};
use super::value::EnergyValue;
use super::surrogates::{quadratic_form, rank_linearization};
use crate::kernel::{leading_eig, solve_sdp, BlockId, CMatrix, Relation, SdpProblem, SdpSolution, Sense, Term, WarmStart};
use crate::model::{
    interferes, offload_bits_from_gains, AllocationState, ChannelSet, Direction, ElementMode,
    StarCoefficients, SystemParams, UplinkOperation,
};
use crate::{Error, Result, C64};

/// Gram-matrix form of the coefficients, indexed `[direction][side]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedCoefficients {
    pub v: [[CMatrix; 2]; 2],
}

impl LiftedCoefficients {
    pub fn lift(coeffs: &StarCoefficients) -> Self {
        let beam = |d: Direction, k: usize| {
            let side = if k == 0 { crate::model::Side::Reflection } else { crate::model::Side::Transmission };
            let u = coeffs.vector(d, side);
            CMatrix::from_fn(u.len(), u.len(), |i, j| u[i] * u[j].conj())
        };
        LiftedCoefficients {
            v: [
                [beam(Direction::Downlink, 0), beam(Direction::Downlink, 1)],
                [beam(Direction::Uplink, 0), beam(Direction::Uplink, 1)],
            ],
        }
    }

    /// `diag(V_r) + diag(V_t)` for one direction.
    pub fn diag_sums(&self, direction: Direction) -> Vec<f64> {
        let d = direction.index();
        (0..self.v[d][0].nrows()).map(|m| self.v[d][0][(m, m)].re + self.v[d][1][(m, m)].re).collect()
    }

    /// `(Tr(V) - lambda_max(V)) / Tr(V)` per block, zero for empty blocks.
    pub fn rank_residuals(&self) -> [[f64; 2]; 2] {
        let r = |v: &CMatrix| {
            let tr = v.trace().re;
            if tr <= 1e-12 {
                0.0
            } else {
                ((tr - leading_eig(v).0) / tr).max(0.0)
            }
        };
        [[r(&self.v[0][0]), r(&self.v[0][1])], [r(&self.v[1][0]), r(&self.v[1][1])]]
    }

    /// Rank-one extraction: phases from the leading eigenvector of every
    /// block, amplitudes from its diagonal (the two agree when the block is
    /// rank one), then projected back onto the per-element constraints of
    /// `variant`. Split pairs are renormalized to sum to one.
    pub fn extract(&self, variant: &Variant) -> StarCoefficients {
        let mut out = StarCoefficients::uniform(self.v[0][0].nrows());
        self.extract_into(Direction::Downlink, variant, &mut out);
        self.extract_into(Direction::Uplink, variant, &mut out);
        out
    }

    /// [`extract`](Self::extract) for one direction, leaving the other
    /// direction of `out` untouched.
    pub fn extract_into(&self, direction: Direction, variant: &Variant, out: &mut StarCoefficients) {
        let d = direction.index();
        let m = self.v[d][0].nrows();
        for k in 0..2 {
            let (_, vec) = leading_eig(&self.v[d][k]);
            for e in 0..m {
                out.beta[d][k][e] = self.v[d][k][(e, e)].re.clamp(0.0, 1.0);
                out.theta[d][k][e] = vec[e].arg().rem_euclid(TAU);
            }
        }
        let layout = if d == 0 { &variant.downlink } else { &variant.uplink };
        for (e, mode) in layout.iter().enumerate() {
            match mode.fixed() {
                Some([r, t]) => {
                    out.beta[d][0][e] = r;
                    out.beta[d][1][e] = t;
                }
                None => {
                    let sum = out.beta[d][0][e] + out.beta[d][1][e];
                    if sum > 1e-300 {
                        out.beta[d][0][e] /= sum;
                        out.beta[d][1][e] /= sum;
                    } else {
                        out.beta[d][0][e] = 0.5;
                        out.beta[d][1][e] = 0.5;
                    }
                }
            }
        }
        out.wrap_phases();
        if d == 1 {
            out.uplink = if variant.uplink.iter().all(|m| *m == ElementMode::Unit) {
                UplinkOperation::TimeSwitched
            } else {
                UplinkOperation::Simultaneous
            };
        }
    }
}

/// `c^T V conj(c)`: the gain `|sum_m c_m u_m|^2` when `V = u u^H`.
pub fn lifted_gain(v: &CMatrix, cascade: &[C64]) -> f64 {
    let conj: Vec<C64> = cascade.iter().map(|c| c.conj()).collect();
    quadratic_form(v, &conj)
}

/// Coefficient matrix `H` with `Re Tr(H V) = c^T V conj(c)`, restricted to
/// the elements in `idx`.
fn gain_matrix(cascade: &[C64], idx: &[usize], scale: f64) -> CMatrix {
    let n = idx.len();
    CMatrix::from_fn(n, n, |i, j| cascade[idx[i]].conj() * cascade[idx[j]] * scale)
}

fn sub_matrix(v: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), idx.len(), |i, j| v[(idx[i], idx[j])])
}

/// Elements that can carry amplitude on each `[direction][side]` beam. Fixed
/// zero amplitudes are left out of the SDP blocks: a PSD block with a forced
/// zero diagonal entry has no interior and the splitting method crawls.
fn support(variant: &Variant) -> [[Vec<usize>; 2]; 2] {
    let beam = |layout: &[ElementMode], k: usize| -> Vec<usize> {
        (0..layout.len()).filter(|&m| layout[m].fixed().map_or(true, |a| a[k] > 0.0)).collect()
    };
    [
        [beam(&variant.downlink, 0), beam(&variant.downlink, 1)],
        [beam(&variant.uplink, 0), beam(&variant.uplink, 1)],
    ]
}

/// Tangent planes per UE in the downlink value approximation.
const TANGENTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Relaxed,
    Rank,
}

struct Handles {
    blocks: [[Option<BlockId>; 2]; 2],
    support: [[Vec<usize>; 2]; 2],
    elements: usize,
    /// Per UE: the 2x2 inverse block and the interference scalar, when the
    /// UE carries an objective term.
    rate: Vec<Option<RateVars>>,
}

#[derive(Clone, Copy)]
struct RateVars {
    w: BlockId,
    b: Option<BlockId>,
    /// Bits at the expansion point.
    bits0: f64,
    /// Bits lost per unit increase of the scaled `A` or `B`.
    slope: f64,
}

impl Handles {
    fn read(&self, sol: &SdpSolution) -> LiftedCoefficients {
        let h = |d: usize, k: usize| {
            let mut full = CMatrix::zeros(self.elements, self.elements);
            if let Some(id) = self.blocks[d][k] {
                let v = sol.hermitian(id);
                let idx = &self.support[d][k];
                for (a, &i) in idx.iter().enumerate() {
                    for (b, &j) in idx.iter().enumerate() {
                        full[(i, j)] = v[(a, b)];
                    }
                }
            }
            full
        };
        LiftedCoefficients { v: [[h(0, 0), h(0, 1)], [h(1, 0), h(1, 1)]] }
    }

    /// Offloaded bits predicted by the SDP's surrogate at its solution.
    fn surrogate_bits(&self, sol: &SdpSolution) -> f64 {
        self.rate
            .iter()
            .flatten()
            .map(|r| {
                let a = sol.symmetric(r.w)[(1, 1)];
                let b = r.b.map_or(1.0, |id| sol.scalar(id));
                r.bits0 - r.slope * (a - 1.0) - r.slope * (b - 1.0)
            })
            .sum()
    }
}

/// Fixed data of one coefficient step.
struct Setup<'a> {
    params: &'a SystemParams,
    channels: &'a ChannelSet,
    variant: &'a Variant,
    alloc: &'a AllocationState,
    opts: &'a SolveOptions,
    up: Vec<Vec<C64>>,
    down: Vec<Vec<C64>>,
    windows: Vec<f64>,
    support: [[Vec<usize>; 2]; 2],
    /// UEs that transmit during their window.
    active: Vec<bool>,
    start_harvest: Vec<f64>,
    /// Energy each UE must keep harvesting, J.
    floors: Vec<f64>,
    /// Bits each UE can make of its harvested energy.
    values: Vec<EnergyValue>,
    local_bits: f64,
}

impl<'a> Setup<'a> {
    fn new(
        params: &'a SystemParams,
        channels: &'a ChannelSet,
        alloc: &'a AllocationState,
        start: &StarCoefficients,
        variant: &'a Variant,
        opts: &'a SolveOptions,
    ) -> Self {
        let n = channels.num_ues();
        let up: Vec<Vec<C64>> = (0..n).map(|i| channels.cascade(i, Direction::Uplink)).collect();
        let down: Vec<Vec<C64>> = (0..n).map(|i| channels.cascade(i, Direction::Downlink)).collect();
        let windows: Vec<f64> =
            channels.sides.iter().map(|s| alloc.offload_window(params, variant.protocol, *s)).collect();
        let active: Vec<bool> = (0..n)
            .map(|i| alloc.power[i] > 0.0 && windows[i] > 0.0 && up[i].iter().any(|c| c.norm_sqr() > 0.0))
            .collect();
        let local_window = (params.period - alloc.tau0).max(0.0);
        let mut local_bits = 0.0;
        let mut floors = Vec::with_capacity(n);
        for i in 0..n {
            let f = alloc.cpu[i].max(0.0);
            local_bits += f * local_window / params.cycles_per_bit[i];
            let used = windows[i] * alloc.power[i].max(0.0) + params.kappa * local_window * f.powi(3);
            floors.push(used / (1.0 - opts.energy_margin));
        }
        let gains: Vec<f64> = (0..n)
            .map(|i| {
                crate::model::channel_gain(channels, start, i, Direction::Uplink).unwrap_or(0.0)
            })
            .collect();
        let values = (0..n)
            .map(|i| {
                let interference: f64 = (0..n)
                    .filter(|&j| interferes(variant.protocol, &channels.sides, i, j))
                    .map(|j| alloc.power[j].max(0.0) * gains[j])
                    .sum();
                EnergyValue {
                    bandwidth: params.bandwidth,
                    window: windows[i],
                    local_window,
                    snr_per_watt: gains[i] / (params.noise_power + interference),
                    kappa: params.kappa,
                    cycles_per_bit: params.cycles_per_bit[i],
                    p_max: params.p_max,
                    f_max: params.f_max,
                }
            })
            .collect();
        let support = support(variant);
        let start_harvest = (0..n)
            .map(|i| crate::model::harvested_energy(params, channels, start, alloc.tau0, i).unwrap_or(0.0))
            .collect();
        Setup { start_harvest, params, channels, variant, alloc, opts, up, down, windows, support, active, floors, values, local_bits }
    }

    fn side(&self, i: usize) -> usize {
        self.channels.sides[i].index()
    }

    fn snr(&self, lifted: &LiftedCoefficients, i: usize) -> f64 {
        if !self.active[i] {
            return 0.0;
        }
        self.alloc.power[i] / self.params.noise_power * lifted_gain(&lifted.v[1][self.side(i)], &self.up[i])
    }

    fn interferers(&self, i: usize) -> Vec<usize> {
        (0..self.active.len())
            .filter(|&j| self.active[j] && interferes(self.variant.protocol, &self.channels.sides, i, j))
            .collect()
    }

    fn offload_bits(&self, coeffs: &StarCoefficients) -> f64 {
        let n = self.active.len();
        let gains: Vec<f64> = (0..n)
            .map(|i| {
                let k = self.channels.sides[i];
                let s: C64 = (0..self.up[i].len()).map(|m| self.up[i][m] * coeffs.element(Direction::Uplink, k, m)).sum();
                s.norm_sqr()
            })
            .collect();
        (0..n)
            .map(|i| offload_bits_from_gains(self.params, &gains, &self.channels.sides, self.alloc, self.variant.protocol, i))
            .sum()
    }

    fn harvest(&self, coeffs: &StarCoefficients) -> Vec<f64> {
        let e = self.params.eta * self.alloc.tau0 * self.params.ap_power;
        (0..self.down.len())
            .map(|i| {
                let k = self.channels.sides[i];
                let s: C64 =
                    (0..self.down[i].len()).map(|m| self.down[i][m] * coeffs.element(Direction::Downlink, k, m)).sum();
                e * s.norm_sqr()
            })
            .collect()
    }

    fn harvest_value(&self, harvest: &[f64]) -> f64 {
        harvest.iter().zip(&self.values).map(|(h, v)| v.bits(*h)).sum()
    }

    /// `Tr(H V)` term of beam `[d][k]` for `cascade`, if the beam exists.
    fn gain_term(&self, blocks: &[[Option<BlockId>; 2]; 2], d: usize, k: usize, cascade: &[C64], scale: f64) -> Option<Term> {
        blocks[d][k].map(|id| Term::trace(id, gain_matrix(cascade, &self.support[d][k], scale)))
    }

    /// Position of element `m` in beam `[d][k]`.
    fn entry(&self, blocks: &[[Option<BlockId>; 2]; 2], d: usize, k: usize, m: usize, weight: f64) -> Option<Term> {
        let pos = self.support[d][k].iter().position(|&e| e == m)?;
        blocks[d][k].map(|id| Term::entry(id, pos, pos, weight))
    }

    fn element_rows(&self, p: &mut SdpProblem, blocks: &[[Option<BlockId>; 2]; 2], d: usize) {
        let layout = if d == 0 { &self.variant.downlink } else { &self.variant.uplink };
        for (m, mode) in layout.iter().enumerate() {
            match mode.fixed() {
                None => {
                    let terms: Vec<Term> = (0..2).filter_map(|k| self.entry(blocks, d, k, m, 1.0)).collect();
                    p.constrain(terms, Relation::Eq, 1.0);
                }
                Some(amp) => {
                    for k in 0..2 {
                        if let Some(t) = self.entry(blocks, d, k, m, 1.0) {
                            p.constrain(vec![t], Relation::Eq, amp[k]);
                        }
                    }
                }
            }
        }
    }

    fn rank_rows(&self, p: &mut SdpProblem, block: Option<BlockId>, idx: &[usize], base: &CMatrix) {
        let Some(block) = block else { return };
        let base = sub_matrix(base, idx);
        let tr = base.trace().re;
        if tr <= 1e-12 {
            return;
        }
        let lin = rank_linearization(&base);
        p.constrain(
            vec![Term::trace(block, lin.residual_coefficient())],
            Relation::Le,
            self.opts.penalty.rank_eps * tr,
        );
    }

    /// SDP of one direction's beams. The two directions share no variables
    /// and are solved separately.
    fn build(
        &self,
        direction: Direction,
        base: &LiftedCoefficients,
        incumbent: &StarCoefficients,
        stage: Stage,
        nu: f64,
    ) -> Option<(SdpProblem, Handles)> {
        let mut p = SdpProblem::new(Sense::Maximize);
        let d = direction.index();
        let mut blocks = [[None; 2]; 2];
        for k in 0..2 {
            let len = self.support[d][k].len();
            if len > 0 {
                blocks[d][k] = Some(p.hermitian(len));
            }
        }
        self.element_rows(&mut p, &blocks, d);
        let (has_objective, rate) = match direction {
            Direction::Uplink => self.uplink_objective(&mut p, &blocks, base, incumbent, nu),
            Direction::Downlink => (self.downlink_objective(&mut p, &blocks), Vec::new()),
        };
        if !has_objective {
            return None;
        }
        if stage == Stage::Rank {
            for k in 0..2 {
                self.rank_rows(&mut p, blocks[d][k], &self.support[d][k], &base.v[d][k]);
            }
        }
        let handles = Handles { blocks, support: self.support.clone(), elements: self.channels.elements(), rate };
        Some((p, handles))
    }

    /// Tangent-plane bound of every offloading UE's rate, plus the binary
    /// penalty under mode switching.
    fn uplink_objective(
        &self,
        p: &mut SdpProblem,
        blocks: &[[Option<BlockId>; 2]; 2],
        base: &LiftedCoefficients,
        incumbent: &StarCoefficients,
        nu: f64,
    ) -> (bool, Vec<Option<RateVars>>) {
        let n = self.active.len();
        let mut has_objective = false;
        let scale: f64 = (0..n).filter(|&i| self.active[i]).map(|i| self.windows[i] * self.params.bandwidth).sum();
        let mut rate = vec![None; n];
        let snr0: Vec<f64> = (0..n).map(|i| self.snr(base, i)).collect();
        let kappa_of = |i: usize, b0: f64| LOG2_E / (1.0 + b0 / snr0[i]);
        let b0_of = |i: usize| 1.0 + self.interferers(i).iter().map(|&j| snr0[j]).sum::<f64>();
        // Weights are normalized to sum to one so the solver tolerances stay
        // meaningful when every SNR is small.
        let total: f64 = (0..n)
            .filter(|&i| self.active[i] && snr0[i] > 1e-14)
            .map(|i| self.windows[i] * self.params.bandwidth / scale * kappa_of(i, b0_of(i)))
            .sum();
        for i in 0..n {
            if !self.active[i] || snr0[i] <= 1e-14 {
                continue;
            }
            let interferers = self.interferers(i);
            let b0 = b0_of(i);
            let bits_scale = self.windows[i] * self.params.bandwidth;
            let kappa = kappa_of(i, b0);
            let weight = bits_scale / scale * kappa / total;
            let Some(own) =
                self.gain_term(blocks, 1, self.side(i), &self.up[i], -self.alloc.power[i] / self.params.noise_power / snr0[i])
            else {
                continue;
            };
            let w = p.symmetric(2);
            p.constrain(vec![Term::entry(w, 0, 0, 1.0), own], Relation::Eq, 0.0);
            p.constrain(vec![Term::entry(w, 0, 1, 1.0)], Relation::Eq, 1.0);
            p.add_objective(Term::entry(w, 1, 1, -weight));
            let b = if interferers.is_empty() {
                None
            } else {
                let b = p.nonnegative();
                let mut terms = vec![Term::scalar(b, 1.0)];
                for &j in &interferers {
                    let coef = -self.alloc.power[j] / self.params.noise_power / b0;
                    terms.extend(self.gain_term(blocks, 1, self.side(j), &self.up[j], coef));
                }
                p.constrain(terms, Relation::Ge, 1.0 / b0);
                p.add_objective(Term::scalar(b, -weight));
                Some(b)
            };
            has_objective = true;
            rate[i] = Some(RateVars {
                w,
                b,
                bits0: bits_scale * (snr0[i] / b0).ln_1p() / LN_2,
                slope: bits_scale * kappa,
            });
        }

        // Binary penalty: tangent of beta (beta - 1) at the expansion point;
        // the constant drops out.
        if self.variant.binary_uplink() && nu > 0.0 {
            for (e, mode) in self.variant.uplink.iter().enumerate() {
                if *mode != ElementMode::Split {
                    continue;
                }
                for k in 0..2 {
                    let mut beta0 = base.v[1][k][(e, e)].re.clamp(0.0, 1.0);
                    // The tangent is flat at one half; lean towards the
                    // incumbent's mode so escalation can act.
                    if (beta0 - 0.5).abs() < 1e-3 {
                        beta0 = if incumbent.beta[1][k][e] >= 0.5 { 0.501 } else { 0.499 };
                    }
                    if let Some(t) = self.entry(blocks, 1, k, e, nu * (2.0 * beta0 - 1.0)) {
                        p.add_objective(t);
                    }
                }
            }
        }
        (has_objective, rate)
    }

    /// Concave value of the harvested energy through tangent planes, with
    /// per-UE floors.
    fn downlink_objective(&self, p: &mut SdpProblem, blocks: &[[Option<BlockId>; 2]; 2]) -> bool {
        let n = self.active.len();
        let mut has_objective = false;
        let charge = self.params.eta * self.alloc.tau0 * self.params.ap_power;
        if charge > 0.0 {
            let potential: Vec<f64> = (0..n)
                .map(|i| charge * self.down[i].iter().map(|c| c.norm()).sum::<f64>().powi(2))
                .collect();
            let reference: f64 = (0..n).map(|i| self.values[i].bits(potential[i])).sum();
            if reference > 0.0 {
                for i in 0..n {
                    if potential[i] <= 0.0 {
                        continue;
                    }
                    let k = self.side(i);
                    let Some(unit) = self.gain_term(blocks, 0, k, &self.down[i], charge / potential[i]) else {
                        continue;
                    };
                    if self.floors[i] > 0.0 {
                        p.constrain(vec![unit.clone()], Relation::Ge, self.floors[i] / potential[i]);
                    }
                    let lo = self.floors[i].max(1e-2 * potential[i]).min(potential[i]);
                    let mut points: Vec<f64> = (0..TANGENTS)
                        .map(|t| lo * (potential[i] / lo).powf(t as f64 / (TANGENTS - 1) as f64))
                        .collect();
                    points.push(self.start_harvest[i].clamp(lo, potential[i]));
                    let s_i = p.free();
                    for e in points {
                        let u = self.values[i].best(e);
                        if !(u.slope.is_finite() && u.bits.is_finite()) {
                            continue;
                        }
                        let slope = u.slope * potential[i] / reference;
                        let mut terms = vec![Term::scalar(s_i, 1.0)];
                        terms.extend(self.gain_term(blocks, 0, k, &self.down[i], -slope * charge / potential[i]));
                        p.constrain(terms, Relation::Le, (u.bits - u.slope * e) / reference);
                    }
                    p.add_objective(Term::scalar(s_i, self.opts.penalty.mu));
                    has_objective = true;
                }
            }
        }

        has_objective
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoeffOutcome {
    pub coeffs: StarCoefficients,
    /// Blocks of the last SDP solved (the rank-constrained one).
    pub lifted: Option<LiftedCoefficients>,
    /// True offloaded bits at `coeffs`.
    pub offload_bits: f64,
    /// True total bits at `coeffs` (with the fixed local computing).
    pub total_bits: f64,
    /// Total bits predicted by the last SDP's objective.
    pub sdp_total_bits: Option<f64>,
    /// True total bits at the point extracted from the last SDP, before it
    /// is compared with the incumbent.
    pub extracted_total_bits: Option<f64>,
    /// Largest relative rank-one residual over the last SDP's blocks.
    pub rank_residual: Option<f64>,
    /// Distance of the last relaxed uplink amplitudes from {0, 1} before
    /// rounding (mode switching only).
    pub binariness: Option<f64>,
    /// Best total bits after every SDP pass, starting at the start point.
    pub trace: Vec<f64>,
    pub sdp_solves: usize,
    pub sdp_iterations: usize,
}

fn solve_lenient(p: &SdpProblem, warm: Option<&WarmStart>, opts: &SolveOptions) -> Result<SdpSolution> {
    match solve_sdp(p, warm, &opts.settings) {
        Ok(s) => Ok(s),
        Err(Error::NotConverged(s)) => Ok(*s),
        Err(e) => Err(e),
    }
}

struct Incumbent {
    coeffs: StarCoefficients,
    up_bits: f64,
    down_value: f64,
    down_harvest: Vec<f64>,
}

impl Incumbent {
    /// Replace one direction of the incumbent by `lifted`'s extraction if the
    /// true objective of that direction improves.
    fn consider(&mut self, setup: &Setup, direction: Direction, lifted: &LiftedCoefficients) -> Option<f64> {
        let mut cand = self.coeffs.clone();
        lifted.extract_into(direction, setup.variant, &mut cand);
        let mut binariness = None;
        match direction {
            Direction::Uplink => {
                if setup.variant.binary_uplink() {
                    binariness = Some(cand.uplink_binariness());
                    cand.round_uplink();
                }
                let bits = setup.offload_bits(&cand);
                if bits > self.up_bits {
                    self.coeffs = cand;
                    self.up_bits = bits;
                }
            }
            Direction::Downlink => {
                let harvest = setup.harvest(&cand);
                let keeps_floor = harvest
                    .iter()
                    .enumerate()
                    .all(|(i, h)| *h >= setup.floors[i].min(self.down_harvest[i]));
                let value = setup.harvest_value(&harvest);
                if keeps_floor && value > self.down_value {
                    self.coeffs = cand;
                    self.down_value = value;
                    self.down_harvest = harvest;
                }
            }
        }
        binariness
    }
}

#[derive(Default)]
struct Counters {
    solves: usize,
    iterations: usize,
}

impl Counters {
    fn solve(&mut self, p: &SdpProblem, warm: Option<&WarmStart>, opts: &SolveOptions) -> Result<SdpSolution> {
        let sol = solve_lenient(p, warm, opts)?;
        self.solves += 1;
        self.iterations += sol.iterations;
        Ok(sol)
    }
}

/// `warm` (or a cold start) with the beams of `direction` set to `base`.
fn seeded(
    prob: &SdpProblem,
    handles: &Handles,
    direction: Direction,
    base: &LiftedCoefficients,
    warm: Option<&WarmStart>,
) -> Result<WarmStart> {
    let d = direction.index();
    let mut start = warm.cloned().unwrap_or_else(|| WarmStart::cold(prob));
    for k in 0..2 {
        if let Some(id) = handles.blocks[d][k] {
            start = start.with_hermitian(prob, id, &sub_matrix(&base.v[d][k], &handles.support[d][k]))?;
        }
    }
    Ok(start)
}

/// Final rank-constrained pass of one direction around the incumbent.
struct RankPass {
    lifted: LiftedCoefficients,
    surrogate_bits: f64,
    /// True offloaded bits at the extracted point (uplink only).
    extracted_bits: f64,
    residual: f64,
}

fn rank_pass(
    setup: &Setup,
    direction: Direction,
    inc: &mut Incumbent,
    warm: Option<&WarmStart>,
    nu: f64,
    counters: &mut Counters,
) -> Result<Option<RankPass>> {
    let base = LiftedCoefficients::lift(&inc.coeffs);
    let incumbent = inc.coeffs.clone();
    let Some((prob, handles)) = setup.build(direction, &base, &incumbent, Stage::Rank, nu) else {
        return Ok(None);
    };
    // Start at the incumbent, which already satisfies the rank row. The
    // feasible set is a thin tube around it, so the pass only polishes.
    let start = seeded(&prob, &handles, direction, &base, warm)?;
    let mut opts = setup.opts.clone();
    opts.settings.sdp_max_iter = opts.settings.sdp_max_iter.min(opts.rank_max_iter);
    let sol = counters.solve(&prob, Some(&start), &opts)?;
    let d = direction.index();
    let lifted = handles.read(&sol);
    let mut extracted = inc.coeffs.clone();
    lifted.extract_into(direction, setup.variant, &mut extracted);
    if direction == Direction::Uplink && setup.variant.binary_uplink() {
        extracted.round_uplink();
    }
    let extracted_bits = setup.offload_bits(&extracted);
    inc.consider(setup, direction, &lifted);
    let residual = lifted.rank_residuals()[d].iter().copied().fold(0.0, f64::max);
    Ok(Some(RankPass { surrogate_bits: handles.surrogate_bits(&sol), extracted_bits, residual, lifted }))
}

/// Solver states carried from one coefficient step to the next, per
/// direction.
#[derive(Debug, Clone, Default)]
pub struct CoeffWarmStart {
    down: Option<WarmStart>,
    up: Option<WarmStart>,
}

/// One coefficient step for fixed `(p, f)` and time split.
pub fn coeff_step(
    params: &SystemParams,
    channels: &ChannelSet,
    alloc: &AllocationState,
    start: &StarCoefficients,
    variant: &Variant,
    opts: &SolveOptions,
) -> Result<CoeffOutcome> {
    coeff_step_warm(params, channels, alloc, start, variant, opts, &mut CoeffWarmStart::default())
}

/// [`coeff_step`] seeded with, and updating, the solver states of an earlier
/// step on the same instance.
pub fn coeff_step_warm(
    params: &SystemParams,
    channels: &ChannelSet,
    alloc: &AllocationState,
    start: &StarCoefficients,
    variant: &Variant,
    opts: &SolveOptions,
    carry: &mut CoeffWarmStart,
) -> Result<CoeffOutcome> {
    if variant.elements() != channels.elements() || start.elements() != channels.elements() {
        return Err(Error::Dimension("variant, coefficients and channels disagree on the element count".into()));
    }
    let setup = Setup::new(params, channels, alloc, start, variant, opts);
    let start_harvest = setup.harvest(start);
    let mut inc = Incumbent {
        coeffs: start.clone(),
        up_bits: setup.offload_bits(start),
        down_value: setup.harvest_value(&start_harvest),
        down_harvest: start_harvest,
    };
    let mut trace = vec![inc.up_bits + setup.local_bits];
    let mut counters = Counters::default();

    // Downlink: the tangent-plane program is already concave in the lifted
    // variables, so one relaxed pass precedes the rank pass.
    let base = LiftedCoefficients::lift(start);
    let mut warm_down = None;
    if let Some((prob, handles)) = setup.build(Direction::Downlink, &base, start, Stage::Relaxed, 0.0) {
        let start = seeded(&prob, &handles, Direction::Downlink, &base, carry.down.as_ref())?;
        let sol = counters.solve(&prob, Some(&start), opts)?;
        warm_down = Some(sol.warm_start());
        carry.down = warm_down.clone();
        inc.consider(&setup, Direction::Downlink, &handles.read(&sol));
    }
    let down_rank = rank_pass(&setup, Direction::Downlink, &mut inc, warm_down.as_ref(), 0.0, &mut counters)?;

    // Uplink: minorize-maximize passes on the relaxation.
    let mut warm: Option<WarmStart> = None;
    let mut base = base;
    let mut nu = opts.penalty.nu;
    let mut escalations = 0;
    let mut passes = 0;
    let mut last = f64::NAN;
    let mut binariness = None;
    loop {
        let incumbent = inc.coeffs.clone();
        let Some((prob, handles)) = setup.build(Direction::Uplink, &base, &incumbent, Stage::Relaxed, nu) else {
            break;
        };
        let start = match &warm {
            Some(w) => w.clone(),
            None => seeded(&prob, &handles, Direction::Uplink, &base, carry.up.as_ref())?,
        };
        let sol = counters.solve(&prob, Some(&start), opts)?;
        warm = Some(sol.warm_start());
        if carry.up.is_none() || passes == 0 {
            carry.up = warm.clone();
        }
        let lifted = handles.read(&sol);
        binariness = inc.consider(&setup, Direction::Uplink, &lifted).or(binariness);
        trace.push(inc.up_bits + setup.local_bits);
        base = lifted;
        passes += 1;
        let settled = (sol.objective - last).abs() <= params.epsilon * sol.objective.abs().max(1.0);
        last = sol.objective;
        if settled || passes >= opts.relaxed_passes {
            let binary_done = binariness.map_or(true, |b| b <= 1e-3);
            if binary_done || escalations >= opts.penalty.max_escalations {
                break;
            }
            nu *= opts.penalty.growth;
            escalations += 1;
            passes = 0;
            last = f64::NAN;
        }
    }
    let up_rank = rank_pass(&setup, Direction::Uplink, &mut inc, warm.as_ref(), nu, &mut counters)?;
    if up_rank.is_some() {
        trace.push(inc.up_bits + setup.local_bits);
    }

    let rank_residual = match (&down_rank, &up_rank) {
        (None, None) => None,
        (a, b) => Some(a.as_ref().map_or(0.0, |r| r.residual).max(b.as_ref().map_or(0.0, |r| r.residual))),
    };
    let sdp_total = up_rank.as_ref().map(|r| setup.local_bits + r.surrogate_bits);
    let extracted_total = up_rank.as_ref().map(|r| setup.local_bits + r.extracted_bits);
    let lifted = if down_rank.is_some() || up_rank.is_some() {
        let mut l = LiftedCoefficients::lift(&inc.coeffs);
        if let Some(r) = down_rank {
            l.v[0] = r.lifted.v[0].clone();
        }
        if let Some(r) = up_rank {
            l.v[1] = r.lifted.v[1].clone();
        }
        Some(l)
    } else {
        None
    };
    Ok(CoeffOutcome {
        offload_bits: inc.up_bits,
        total_bits: inc.up_bits + setup.local_bits,
        coeffs: inc.coeffs,
        lifted,
        sdp_total_bits: sdp_total,
        extracted_total_bits: extracted_total,
        rank_residual,
        binariness,
        trace,
        sdp_solves: counters.solves,
        sdp_iterations: counters.iterations,
    })
}
