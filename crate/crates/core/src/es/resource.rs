//! Power and CPU-frequency allocation for fixed surface coefficients and
//! time split: successive tangent-plane bounds of the interference term, each
//! solved with the barrier method.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;

use super::surrogates::taylor_r;
use crate::kernel::{solve_smooth, SmoothConcaveProblem, SolverSettings};
use crate::model::{
    channel_gain, harvested_energy, interferes, AllocationState, ChannelSet, Direction, Protocol,
    StarCoefficients, SystemParams,
};
use crate::{Error, Result};

/// Everything the resource step needs besides the current `(p, f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceSubproblem {
    pub bandwidth: f64,
    pub noise: f64,
    pub kappa: f64,
    pub p_max: f64,
    pub f_max: f64,
    pub cycles_per_bit: Vec<f64>,
    /// Energy each UE may spend, J.
    pub budgets: Vec<f64>,
    /// Uplink gains `|h_i|^2`.
    pub gains: Vec<f64>,
    /// Offloading windows, s.
    pub windows: Vec<f64>,
    /// Local computing window `T - tau0`, s.
    pub local_window: f64,
    pub interferers: Vec<Vec<usize>>,
}

impl ResourceSubproblem {
    /// Build from the current operating point; budgets are the harvested
    /// energies shrunk by `margin`.
    pub fn new(
        params: &SystemParams,
        channels: &ChannelSet,
        coeffs: &StarCoefficients,
        alloc: &AllocationState,
        protocol: Protocol,
        margin: f64,
    ) -> Result<Self> {
        let n = channels.num_ues();
        let mut budgets = Vec::with_capacity(n);
        let mut gains = Vec::with_capacity(n);
        for i in 0..n {
            budgets.push((1.0 - margin) * harvested_energy(params, channels, coeffs, alloc.tau0, i)?);
            gains.push(channel_gain(channels, coeffs, i, Direction::Uplink)?);
        }
        let sides = &channels.sides;
        Ok(ResourceSubproblem {
            bandwidth: params.bandwidth,
            noise: params.noise_power,
            kappa: params.kappa,
            p_max: params.p_max,
            f_max: params.f_max,
            cycles_per_bit: params.cycles_per_bit.clone(),
            budgets,
            gains,
            windows: sides.iter().map(|s| alloc.offload_window(params, protocol, *s)).collect(),
            local_window: (params.period - alloc.tau0).max(0.0),
            interferers: (0..n)
                .map(|i| (0..n).filter(|&j| interferes(protocol, sides, i, j)).collect())
                .collect(),
        })
    }

    fn n(&self) -> usize {
        self.budgets.len()
    }

    pub fn power_cap(&self, i: usize) -> f64 {
        if self.windows[i] > 0.0 && self.budgets[i] > 0.0 {
            self.p_max.min(self.budgets[i] / self.windows[i])
        } else {
            0.0
        }
    }

    pub fn cpu_cap(&self, i: usize) -> f64 {
        if self.local_window > 0.0 && self.budgets[i] > 0.0 {
            self.f_max.min((self.budgets[i] / (self.kappa * self.local_window)).cbrt())
        } else {
            0.0
        }
    }

    fn offload(&self, i: usize, power: &[f64]) -> f64 {
        if self.windows[i] <= 0.0 {
            return 0.0;
        }
        let interference: f64 = self.interferers[i].iter().map(|&j| power[j] * self.gains[j]).sum();
        let sinr = power[i] * self.gains[i] / (interference + self.noise);
        self.windows[i] * self.bandwidth * sinr.ln_1p() / LN_2
    }

    /// True computed bits at `(p, f)`.
    pub fn objective(&self, power: &[f64], cpu: &[f64]) -> f64 {
        (0..self.n())
            .map(|i| self.offload(i, power) + cpu[i] * self.local_window / self.cycles_per_bit[i])
            .sum()
    }

    /// Energy spent by UE `i`, J.
    pub fn consumption(&self, i: usize, power: &[f64], cpu: &[f64]) -> f64 {
        self.windows[i] * power[i] + self.kappa * self.local_window * cpu[i].powi(3)
    }

    /// Concave surrogate in bits: the interference term of each rate replaced
    /// by its tangent plane at `base`.
    pub fn surrogate(&self, base: &[f64], power: &[f64], cpu: &[f64]) -> f64 {
        (0..self.n())
            .map(|i| {
                let mut own = self.interferers[i].clone();
                own.push(i);
                let total: f64 = own.iter().map(|&j| power[j] * self.gains[j]).sum::<f64>() + self.noise;
                let bound = taylor_r(base, &self.gains, self.noise, &self.interferers[i]);
                self.windows[i] * self.bandwidth * (total.log2() - bound.eval(power))
                    + cpu[i] * self.local_window / self.cycles_per_bit[i]
            })
            .sum()
    }

    /// Maximize the surrogate built at `base`. Returns `(p, f)`.
    pub fn solve_surrogate(&self, base: &[f64], settings: &SolverSettings) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n();
        let mut power = vec![0.0; n];
        let mut cpu = vec![0.0; n];
        let Some(prob) = Barrier::build(self, base) else {
            return Ok((power, cpu));
        };
        let start: Vec<f64> =
            prob.vars.iter().map(|v| if v.is_power { 0.25 } else { 0.5 }).collect();
        let sol = solve_smooth(&prob, &start, settings)?;
        for (k, v) in prob.vars.iter().enumerate() {
            let x = sol.x[k].clamp(0.0, 1.0);
            if v.is_power {
                power[v.ue] = x * v.cap;
            } else {
                cpu[v.ue] = x * v.cap;
            }
        }
        // Spend whatever energy the barrier left on the table.
        for i in 0..n {
            let cap = self.cpu_cap(i);
            if cap > 0.0 {
                let rest = self.budgets[i] - self.windows[i] * power[i];
                if rest > 0.0 {
                    cpu[i] = cpu[i].max((rest / (self.kappa * self.local_window)).cbrt().min(cap));
                }
            }
            // Guard against round-off pushing consumption over budget.
            let excess = self.consumption(i, &power, &cpu) - self.budgets[i];
            if excess > 0.0 && cpu[i] > 0.0 {
                let allowed = (self.budgets[i] - self.windows[i] * power[i]).max(0.0);
                cpu[i] = (allowed / (self.kappa * self.local_window)).cbrt();
            }
        }
        Ok((power, cpu))
    }
}

struct Var {
    ue: usize,
    is_power: bool,
    cap: f64,
}

/// Offload term of one UE in normalized variables:
/// `weight * ln(1 + sum a_k x_k) - sum lin_k x_k`.
struct Term {
    weight: f64,
    snr: Vec<(usize, f64)>,
    lin: Vec<(usize, f64)>,
}

/// `c1 x + c3 y^3 <= 1` for one UE.
struct EnergyRow {
    power: Option<(usize, f64)>,
    cpu: Option<(usize, f64)>,
}

struct Barrier {
    vars: Vec<Var>,
    terms: Vec<Term>,
    local: Vec<(usize, f64)>,
    rows: Vec<EnergyRow>,
}

impl Barrier {
    fn build(sp: &ResourceSubproblem, base: &[f64]) -> Option<Barrier> {
        let n = sp.n();
        let mut vars = Vec::new();
        let mut pvar = vec![None; n];
        let mut fvar = vec![None; n];
        for i in 0..n {
            let pc = sp.power_cap(i);
            if pc > 0.0 {
                pvar[i] = Some(vars.len());
                vars.push(Var { ue: i, is_power: true, cap: pc });
            }
            let fc = sp.cpu_cap(i);
            if fc > 0.0 {
                fvar[i] = Some(vars.len());
                vars.push(Var { ue: i, is_power: false, cap: fc });
            }
        }
        if vars.is_empty() {
            return None;
        }
        // Scale: the best each UE could do on its own.
        let scale: f64 = (0..n)
            .map(|i| {
                let off = sp.windows[i] * sp.bandwidth * (sp.gains[i] * sp.power_cap(i) / sp.noise).ln_1p() / LN_2;
                off + sp.cpu_cap(i) * sp.local_window / sp.cycles_per_bit[i]
            })
            .sum();
        if !(scale > 0.0) {
            return None;
        }
        let mut terms = Vec::new();
        for i in 0..n {
            if sp.windows[i] <= 0.0 {
                continue;
            }
            let w = sp.windows[i] * sp.bandwidth / scale;
            let mut snr = Vec::new();
            for &j in sp.interferers[i].iter().chain(std::iter::once(&i)) {
                if let Some(k) = pvar[j] {
                    let a = sp.gains[j] * vars[k].cap / sp.noise;
                    if a > 0.0 {
                        snr.push((k, a));
                    }
                }
            }
            if snr.is_empty() {
                continue;
            }
            let bound = taylor_r(base, &sp.gains, sp.noise, &sp.interferers[i]);
            let lin = sp.interferers[i]
                .iter()
                .filter_map(|&j| pvar[j].map(|k| (k, w * bound.gradient[j] * vars[k].cap)))
                .filter(|(_, c)| *c != 0.0)
                .collect();
            terms.push(Term { weight: w / LN_2, snr, lin });
        }
        let local = (0..n)
            .filter_map(|i| fvar[i].map(|k| (k, vars[k].cap * sp.local_window / sp.cycles_per_bit[i] / scale)))
            .collect();
        let rows = (0..n)
            .filter(|&i| pvar[i].is_some() || fvar[i].is_some())
            .map(|i| EnergyRow {
                power: pvar[i].map(|k| (k, sp.windows[i] * vars[k].cap / sp.budgets[i])),
                cpu: fvar[i].map(|k| (k, sp.kappa * sp.local_window * vars[k].cap.powi(3) / sp.budgets[i])),
            })
            .collect();
        Some(Barrier { vars, terms, local, rows })
    }
}

impl SmoothConcaveProblem for Barrier {
    fn dim(&self) -> usize {
        self.vars.len()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.vars.len()], vec![1.0; self.vars.len()])
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let mut v: f64 = self.local.iter().map(|(k, c)| c * x[*k]).sum();
        for t in &self.terms {
            let s: f64 = t.snr.iter().map(|(k, a)| a * x[*k]).sum();
            v += t.weight * s.ln_1p() - t.lin.iter().map(|(k, c)| c * x[*k]).sum::<f64>();
        }
        v
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        g.iter_mut().for_each(|v| *v = 0.0);
        for (k, c) in &self.local {
            g[*k] += c;
        }
        for t in &self.terms {
            let s: f64 = 1.0 + t.snr.iter().map(|(k, a)| a * x[*k]).sum::<f64>();
            for (k, a) in &t.snr {
                g[*k] += t.weight * a / s;
            }
            for (k, c) in &t.lin {
                g[*k] -= c;
            }
        }
    }

    fn hessian(&self, x: &[f64], h: &mut DMatrix<f64>) {
        for t in &self.terms {
            let s: f64 = 1.0 + t.snr.iter().map(|(k, a)| a * x[*k]).sum::<f64>();
            let f = t.weight / (s * s);
            for (k1, a1) in &t.snr {
                for (k2, a2) in &t.snr {
                    h[(*k1, *k2)] -= f * a1 * a2;
                }
            }
        }
    }

    fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    fn constraint(&self, j: usize, x: &[f64]) -> f64 {
        let r = &self.rows[j];
        r.power.map_or(0.0, |(k, c)| c * x[k]) + r.cpu.map_or(0.0, |(k, c)| c * x[k].powi(3)) - 1.0
    }

    fn constraint_gradient(&self, j: usize, x: &[f64], g: &mut [f64]) {
        let r = &self.rows[j];
        if let Some((k, c)) = r.power {
            g[k] = c;
        }
        if let Some((k, c)) = r.cpu {
            g[k] = 3.0 * c * x[k] * x[k];
        }
    }

    fn constraint_hessian(&self, j: usize, x: &[f64], h: &mut DMatrix<f64>) {
        if let Some((k, c)) = self.rows[j].cpu {
            h[(k, k)] = 6.0 * c * x[k];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceOutcome {
    pub power: Vec<f64>,
    pub cpu: Vec<f64>,
    /// True computed bits at the returned point.
    pub objective: f64,
    /// Best objective after each pass, starting with the start point.
    pub trace: Vec<f64>,
}

/// Alternate tangent-plane refreshes and barrier solves until the objective
/// changes by less than `epsilon` (relative). `alloc` supplies the time split
/// and the starting `(p, f)`.
pub fn resource_step(
    params: &SystemParams,
    channels: &ChannelSet,
    coeffs: &StarCoefficients,
    alloc: &AllocationState,
    protocol: Protocol,
    margin: f64,
    settings: &SolverSettings,
) -> Result<ResourceOutcome> {
    let sp = ResourceSubproblem::new(params, channels, coeffs, alloc, protocol, margin)?;
    let n = sp.n();
    if alloc.power.len() != n || alloc.cpu.len() != n {
        return Err(Error::Dimension("allocation length differs from UE count".into()));
    }
    let start_ok = (0..n).all(|i| {
        let e = sp.consumption(i, &alloc.power, &alloc.cpu);
        alloc.power[i] >= 0.0
            && alloc.cpu[i] >= 0.0
            && alloc.power[i] <= params.p_max * (1.0 + 1e-12)
            && alloc.cpu[i] <= params.f_max * (1.0 + 1e-12)
            && e <= sp.budgets[i] * (1.0 + 1e-8)
    });
    if !start_ok {
        return Err(Error::Infeasible("resource step start violates the energy or box constraints".into()));
    }
    let mut best = (alloc.power.clone(), alloc.cpu.clone());
    let mut best_val = sp.objective(&best.0, &best.1);
    let mut trace = vec![best_val];
    for _ in 0..params.max_iterations {
        let (p, f) = sp.solve_surrogate(&best.0, settings)?;
        let val = sp.objective(&p, &f);
        let prev = best_val;
        // Within solver tolerance of the incumbent still counts: the fresh
        // point spends the whole budget, the incumbent may not.
        if val >= best_val - 1e-9 * best_val.abs() {
            best_val = val;
            best = (p, f);
        }
        trace.push(best_val);
        if (best_val - prev).abs() <= params.epsilon * best_val.abs().max(1.0) {
            break;
        }
    }
    Ok(ResourceOutcome { power: best.0, cpu: best.1, objective: best_val, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Side;
    use crate::C64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn subproblem(ues: usize, seed: u64) -> ResourceSubproblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ResourceSubproblem {
            bandwidth: 20e6,
            noise: 1e-8,
            kappa: 1e-28,
            p_max: 0.1,
            f_max: 8e9,
            cycles_per_bit: vec![1000.0; ues],
            budgets: (0..ues).map(|_| rng.gen_range(2e-6..2e-5)).collect(),
            gains: (0..ues).map(|_| rng.gen_range(1e-5..1e-4)).collect(),
            windows: vec![0.6; ues],
            local_window: 0.6,
            interferers: (0..ues).map(|i| (0..ues).filter(|&j| j != i).collect()).collect(),
        }
    }

    /// Best CPU frequency once the transmit power is fixed: spend the rest.
    fn cpu_for(sp: &ResourceSubproblem, i: usize, p: f64) -> Option<f64> {
        let rest = sp.budgets[i] - sp.windows[i] * p;
        (rest >= 0.0).then(|| (rest / (sp.kappa * sp.local_window)).cbrt().min(sp.f_max))
    }

    #[test]
    fn surrogate_solve_matches_grid_two_ues() {
        let settings = SolverSettings::default();
        for seed in 0..3 {
            let sp = subproblem(2, seed);
            let base = [0.3 * sp.power_cap(0), 0.6 * sp.power_cap(1)];
            let (p, f) = sp.solve_surrogate(&base, &settings).unwrap();
            let ours = sp.surrogate(&base, &p, &f);
            let steps = 1000;
            let mut grid = f64::NEG_INFINITY;
            for a in 0..=steps {
                let p0 = sp.power_cap(0) * a as f64 / steps as f64;
                let Some(f0) = cpu_for(&sp, 0, p0) else { continue };
                for b in 0..=steps {
                    let p1 = sp.power_cap(1) * b as f64 / steps as f64;
                    let Some(f1) = cpu_for(&sp, 1, p1) else { continue };
                    grid = grid.max(sp.surrogate(&base, &[p0, p1], &[f0, f1]));
                }
            }
            assert!((ours - grid).abs() <= 1e-3 * grid.abs(), "seed {seed}: {ours} vs {grid}");
            for i in 0..2 {
                assert!(sp.consumption(i, &p, &f) <= sp.budgets[i] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn single_ue_matches_two_dimensional_grid() {
        let settings = SolverSettings::default();
        for seed in 0..3 {
            let sp = subproblem(1, 10 + seed);
            let (p, f) = sp.solve_surrogate(&[0.0], &settings).unwrap();
            let ours = sp.objective(&p, &f);
            let steps = 1000;
            let mut grid = f64::NEG_INFINITY;
            for a in 0..=steps {
                let pp = sp.power_cap(0) * a as f64 / steps as f64;
                for b in 0..=steps {
                    let ff = sp.cpu_cap(0) * b as f64 / steps as f64;
                    if sp.consumption(0, &[pp], &[ff]) <= sp.budgets[0] {
                        grid = grid.max(sp.objective(&[pp], &[ff]));
                    }
                }
            }
            assert!(ours >= grid * (1.0 - 1e-3) && ours <= grid * (1.0 + 1e-3), "{ours} vs {grid}");
        }
    }

    fn instance(ues: usize, seed: u64) -> (SystemParams, ChannelSet, StarCoefficients) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = SystemParams::defaults(4, ues);
        let mut v = |n: usize, s: f64| -> Vec<C64> {
            (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * s).collect()
        };
        let channels = ChannelSet {
            g_ap_ris: v(4, 3e-2),
            h_ap_ris: v(4, 3e-2),
            g_ris_ue: (0..ues).map(|_| v(4, 3e-2)).collect(),
            h_ris_ue: (0..ues).map(|_| v(4, 3e-2)).collect(),
            sides: (0..ues).map(|i| if i % 2 == 0 { Side::Reflection } else { Side::Transmission }).collect(),
        };
        let coeffs = StarCoefficients::random_phases(4, &mut rng);
        (params, channels, coeffs)
    }

    #[test]
    fn empty_budget_gives_idle_ues() {
        let (params, channels, coeffs) = instance(2, 1);
        let alloc = AllocationState::idle(0.0, 2);
        let out = resource_step(&params, &channels, &coeffs, &alloc, Protocol::Es, 1e-4, &SolverSettings::default())
            .unwrap();
        assert_eq!(out.power, vec![0.0, 0.0]);
        assert_eq!(out.cpu, vec![0.0, 0.0]);
        assert_eq!(out.objective, 0.0);
    }

    #[test]
    fn traces_are_monotone_and_budgets_spent() {
        let settings = SolverSettings::default();
        for seed in 0..20 {
            let (params, channels, coeffs) = instance(3, 100 + seed);
            let alloc = AllocationState::idle(0.4, 3);
            for protocol in [Protocol::Es, Protocol::Ts] {
                let alloc = AllocationState { tau_r: 0.3, tau_t: 0.3, ..alloc.clone() };
                let out = resource_step(&params, &channels, &coeffs, &alloc, protocol, 1e-4, &settings).unwrap();
                for w in out.trace.windows(2) {
                    assert!(w[1] >= w[0] * (1.0 - 1e-6), "seed {seed}: {:?}", out.trace);
                }
                let sp = ResourceSubproblem::new(&params, &channels, &coeffs, &alloc, protocol, 0.0).unwrap();
                for i in 0..3 {
                    let used = sp.consumption(i, &out.power, &out.cpu);
                    let r = (used - sp.budgets[i]) / sp.budgets[i];
                    assert!((-1e-3..=0.0).contains(&r), "seed {seed} ue {i}: residual {r}");
                }
            }
        }
    }

    #[test]
    fn infeasible_start_rejected() {
        let (params, channels, coeffs) = instance(1, 3);
        let mut alloc = AllocationState::idle(0.4, 1);
        alloc.power[0] = 0.1;
        let r = resource_step(&params, &channels, &coeffs, &alloc, Protocol::Es, 1e-4, &SolverSettings::default());
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }
}
