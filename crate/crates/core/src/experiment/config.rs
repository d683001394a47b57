//! Experiment configuration files.
//!
//! ```toml
//! protocols = ["es", "ms", "ts", "conventional"]
//! seeds = { start = 0, count = 20 }
//! output = "results/p0.csv"
//!
//! [system]
//! ues = 4
//! elements = 8
//! bandwidth = "20 MHz"
//! noise_power = "-50 dBm"
//! ap_power = "1 W"
//!
//! [sweep]
//! axis = "ap_power"
//! values = ["0.5 W", "1 W", "2 W"]
//! ```
//!
//! Every table and key is optional except `protocols`, `seeds` and
//! `[sweep]`. Physical quantities are strings with a unit suffix.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::units::{parse, Dimension};
use crate::baseline::BruteGrids;
use crate::channel::{Geometry, PathLossParams};
use crate::es::{SolveOptions, Variant};
use crate::model::{Protocol, SystemParams};
use crate::{Error, Result};

/// Optimizer a row was produced by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Es,
    Ms,
    Ts,
    /// Reflect-only plus transmit-only surface of the same size.
    Conventional,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Es => "es",
            Scheme::Ms => "ms",
            Scheme::Ts => "ts",
            Scheme::Conventional => "conventional",
        }
    }

    pub fn variant(self, elements: usize) -> Result<Variant> {
        match self {
            Scheme::Es => Ok(Variant::star(Protocol::Es, elements)),
            Scheme::Ms => Ok(Variant::star(Protocol::Ms, elements)),
            Scheme::Ts => Ok(Variant::star(Protocol::Ts, elements)),
            Scheme::Conventional => Variant::conventional(elements),
        }
    }
}

/// Swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Axis {
    #[serde(rename = "ap_power", alias = "P0")]
    ApPower,
    #[serde(rename = "period", alias = "T")]
    Period,
    #[serde(rename = "elements", alias = "M")]
    Elements,
    #[serde(rename = "ues", alias = "I")]
    Ues,
    #[serde(rename = "cycles_per_bit", alias = "C")]
    CyclesPerBit,
    /// Fixed charging times instead of the search.
    #[serde(rename = "tau0")]
    Tau0,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::ApPower => "ap_power",
            Axis::Period => "period",
            Axis::Elements => "elements",
            Axis::Ues => "ues",
            Axis::CyclesPerBit => "cycles_per_bit",
            Axis::Tau0 => "tau0",
        }
    }

    fn dimension(self) -> Option<Dimension> {
        match self {
            Axis::ApPower => Some(Dimension::Power),
            Axis::Period | Axis::Tau0 => Some(Dimension::Time),
            Axis::Elements | Axis::Ues | Axis::CyclesPerBit => None,
        }
    }
}

/// A number or a string with a unit suffix.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Quantity {
    Number(f64),
    Text(String),
}

impl Quantity {
    fn si(&self, field: &str, dim: Option<Dimension>) -> Result<f64> {
        match (self, dim) {
            (Quantity::Number(v), None | Some(Dimension::Gain)) => Ok(*v),
            (Quantity::Number(v), Some(d)) => parse(field, &v.to_string(), d),
            (Quantity::Text(t), Some(d)) => parse(field, t, d),
            (Quantity::Text(t), None) => {
                t.trim().parse().map_err(|_| Error::Config(format!("{field}: expected a number, got {t:?}")))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawSeeds {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawCycles {
    Scalar(f64),
    PerUe(Vec<f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    ues: Option<usize>,
    elements: Option<usize>,
    bandwidth: Option<Quantity>,
    noise_power: Option<Quantity>,
    eta: Option<f64>,
    p_max: Option<Quantity>,
    f_max: Option<Quantity>,
    kappa: Option<f64>,
    period: Option<Quantity>,
    ap_power: Option<Quantity>,
    cycles_per_bit: Option<RawCycles>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    max_iterations: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    rho: Option<Quantity>,
    alpha_u1: Option<f64>,
    alpha_u2: Option<f64>,
    alpha_d1: Option<f64>,
    alpha_d2: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    ap_ris_distance: Option<Quantity>,
    reflection_range: Option<[Quantity; 2]>,
    transmission_range: Option<[Quantity; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: Axis,
    values: Vec<Quantity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tau0_step: Option<Quantity>,
    init_seed: Option<u64>,
    energy_margin: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    phase_points: Option<usize>,
    amplitude_points: Option<usize>,
    power_points: Option<usize>,
    slot_points: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    protocols: Vec<Scheme>,
    seeds: RawSeeds,
    output: Option<PathBuf>,
    #[serde(default)]
    system: RawSystem,
    #[serde(default)]
    channel: RawChannel,
    #[serde(default)]
    geometry: RawGeometry,
    sweep: RawSweep,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    oracle: RawOracle,
}

/// A validated experiment in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    /// Base system; the swept field is overwritten per sweep value.
    pub system: SystemParams,
    /// Path-loss model; the seed is overwritten per instance.
    pub path_loss: PathLossParams,
    pub geometry: Geometry,
    pub protocols: Vec<Scheme>,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
    /// Charging-time search step, s.
    pub tau0_step: f64,
    pub solver: SolveOptions,
    pub oracle: BruteGrids,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        raw.resolve()
    }

    /// System parameters at the `k`-th sweep value.
    pub fn system_at(&self, k: usize) -> SystemParams {
        let mut p = self.system.clone();
        let v = self.values[k];
        match self.axis {
            Axis::ApPower => p.ap_power = v,
            Axis::Period => p.period = v,
            Axis::Elements => p.elements = v as usize,
            Axis::Ues => {
                let c = p.cycles_per_bit.first().copied().unwrap_or(1000.0);
                p.cycles_per_bit = vec![c; v as usize];
            }
            Axis::CyclesPerBit => p.cycles_per_bit = vec![v; p.cycles_per_bit.len()],
            Axis::Tau0 => {}
        }
        p
    }

    /// Fixed charging time at the `k`-th sweep value, if the axis is `tau0`.
    pub fn fixed_tau0(&self, k: usize) -> Option<f64> {
        (self.axis == Axis::Tau0).then(|| self.values[k])
    }

    /// Apply the command-line seed offset.
    pub fn offset_seeds(&mut self, offset: u64) {
        for s in &mut self.seeds {
            *s = s.wrapping_add(offset);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.protocols.is_empty() {
            return Err(Error::Config("protocols: at least one protocol is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: at least one seed is required".into()));
        }
        if self.values.is_empty() {
            return Err(Error::Config("sweep.values: at least one value is required".into()));
        }
        self.path_loss.validate().map_err(|e| field_error("channel", e))?;
        self.geometry.validate().map_err(|e| field_error("geometry", e))?;
        if !(self.tau0_step > 0.0 && self.tau0_step < self.system.period) && self.axis != Axis::Period {
            return Err(Error::Config(format!(
                "solver.tau0_step must lie in (0, period), got {}",
                self.tau0_step
            )));
        }
        if !(self.solver.energy_margin >= 0.0 && self.solver.energy_margin < 1.0) {
            return Err(Error::Config(format!(
                "solver.energy_margin must lie in [0, 1), got {}",
                self.solver.energy_margin
            )));
        }
        for k in 0..self.values.len() {
            let v = self.values[k];
            let field = format!("sweep.values[{k}]");
            let integral = matches!(self.axis, Axis::Elements | Axis::Ues);
            if !(v.is_finite() && v > 0.0) || (integral && v.fract() != 0.0) {
                return Err(Error::Config(format!("{field}: {v} is not a valid {}", self.axis.name())));
            }
            let p = self.system_at(k);
            p.validate().map_err(|e| field_error(if self.axis == Axis::Tau0 { "system" } else { &field }, e))?;
            if let Some(t) = self.fixed_tau0(k) {
                if t >= p.period {
                    return Err(Error::Config(format!("{field}: charging time {t} must be below the period")));
                }
            }
            if self.tau0_step >= p.period && self.fixed_tau0(k).is_none() {
                return Err(Error::Config(format!(
                    "solver.tau0_step: {} is not below the period {} at {field}",
                    self.tau0_step, p.period
                )));
            }
            for s in &self.protocols {
                s.variant(p.elements).map_err(|e| field_error("protocols", e))?;
            }
        }
        Ok(())
    }
}

fn field_error(field: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{field}: {m}")),
        other => other,
    }
}

fn opt(q: &Option<Quantity>, field: &str, dim: Dimension, default: f64) -> Result<f64> {
    q.as_ref().map_or(Ok(default), |q| q.si(field, Some(dim)))
}

impl RawConfig {
    fn resolve(self) -> Result<ExperimentConfig> {
        let s = &self.system;
        let ues = s.ues.unwrap_or(4);
        let mut system = SystemParams::defaults(s.elements.unwrap_or(8), ues);
        system.bandwidth = opt(&s.bandwidth, "system.bandwidth", Dimension::Frequency, system.bandwidth)?;
        system.noise_power = opt(&s.noise_power, "system.noise_power", Dimension::Power, system.noise_power)?;
        system.p_max = opt(&s.p_max, "system.p_max", Dimension::Power, system.p_max)?;
        system.f_max = opt(&s.f_max, "system.f_max", Dimension::Frequency, system.f_max)?;
        system.period = opt(&s.period, "system.period", Dimension::Time, system.period)?;
        system.ap_power = opt(&s.ap_power, "system.ap_power", Dimension::Power, system.ap_power)?;
        system.eta = s.eta.unwrap_or(system.eta);
        system.kappa = s.kappa.unwrap_or(system.kappa);
        system.epsilon = s.epsilon.unwrap_or(system.epsilon);
        system.delta = s.delta.unwrap_or(system.delta);
        system.max_iterations = s.max_iterations.unwrap_or(system.max_iterations);
        match &s.cycles_per_bit {
            None => {}
            Some(RawCycles::Scalar(c)) => system.cycles_per_bit = vec![*c; ues],
            Some(RawCycles::PerUe(v)) => {
                if v.len() != ues {
                    return Err(Error::Config(format!(
                        "system.cycles_per_bit: {} entries for {ues} UEs",
                        v.len()
                    )));
                }
                system.cycles_per_bit = v.clone();
            }
        }
        system.validate().map_err(|e| field_error("system", e))?;

        let c = &self.channel;
        let d = PathLossParams::default();
        let path_loss = PathLossParams {
            rho: opt(&c.rho, "channel.rho", Dimension::Gain, d.rho)?,
            alpha_u1: c.alpha_u1.unwrap_or(d.alpha_u1),
            alpha_u2: c.alpha_u2.unwrap_or(d.alpha_u2),
            alpha_d1: c.alpha_d1.unwrap_or(d.alpha_d1),
            alpha_d2: c.alpha_d2.unwrap_or(d.alpha_d2),
            seed: 0,
        };

        let g = &self.geometry;
        let dg = Geometry::default();
        let range = |r: &Option<[Quantity; 2]>, field: &str, default: [f64; 2]| -> Result<[f64; 2]> {
            match r {
                None => Ok(default),
                Some([lo, hi]) => Ok([
                    lo.si(&format!("{field}[0]"), Some(Dimension::Distance))?,
                    hi.si(&format!("{field}[1]"), Some(Dimension::Distance))?,
                ]),
            }
        };
        let geometry = Geometry {
            ap_ris_distance: opt(&g.ap_ris_distance, "geometry.ap_ris_distance", Dimension::Distance, dg.ap_ris_distance)?,
            reflection_range: range(&g.reflection_range, "geometry.reflection_range", dg.reflection_range)?,
            transmission_range: range(&g.transmission_range, "geometry.transmission_range", dg.transmission_range)?,
        };

        let axis = self.sweep.axis;
        let values = self
            .sweep
            .values
            .iter()
            .enumerate()
            .map(|(k, q)| q.si(&format!("sweep.values[{k}]"), axis.dimension()))
            .collect::<Result<Vec<f64>>>()?;

        let seeds = match self.seeds {
            RawSeeds::List(v) => v,
            RawSeeds::Range { start, count } => (start..start.saturating_add(count)).collect(),
        };

        let mut solver = SolveOptions::default();
        solver.init_seed = self.solver.init_seed.unwrap_or(solver.init_seed);
        solver.energy_margin = self.solver.energy_margin.unwrap_or(solver.energy_margin);
        let tau0_step = opt(&self.solver.tau0_step, "solver.tau0_step", Dimension::Time, 0.05)?;

        let o = &self.oracle;
        let dgr = BruteGrids::default();
        let oracle = BruteGrids {
            tau0_step,
            phase_points: o.phase_points.unwrap_or(dgr.phase_points),
            amplitude_points: o.amplitude_points.unwrap_or(dgr.amplitude_points),
            power_points: o.power_points.unwrap_or(dgr.power_points),
            slot_points: o.slot_points.unwrap_or(dgr.slot_points),
            parallel: dgr.parallel,
        };

        let cfg = ExperimentConfig {
            name: self.name.unwrap_or_else(|| "experiment".into()),
            system,
            path_loss,
            geometry,
            protocols: self.protocols,
            axis,
            values,
            seeds,
            output: self.output,
            tau0_step,
            solver,
            oracle,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
