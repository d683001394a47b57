//! Monte-Carlo experiments: sweeps over one system quantity, repeated over
//! channel seeds, with CSV output.
//!
//! Every (sweep value, seed, protocol) cell is independent and runs on the
//! rayon pool; rows are assembled in a fixed order, so output bytes depend
//! only on the configuration.

mod config;
mod units;

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

pub use config::{Axis, ExperimentConfig, Scheme};
pub use units::{parse as parse_quantity, Dimension};

use crate::baseline::brute_force_small;
use crate::channel::generate;
use crate::es::{alternate, search_tau0, tau0_grid, SolveReport};
use crate::model::{ChannelSet, Protocol, SystemParams};
use crate::{Error, Result};

/// One output line. Summary rows leave `seed` and the per-run fields empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    /// `run`, `curve`, `oracle` or `summary`.
    pub kind: &'static str,
    pub protocol: &'static str,
    pub axis: &'static str,
    pub value: f64,
    pub seed: Option<u64>,
    pub ap_power: f64,
    pub period: f64,
    pub elements: usize,
    pub ues: usize,
    /// Mean over UEs.
    pub cycles_per_bit: f64,
    pub tau0: Option<f64>,
    pub tau_r: Option<f64>,
    pub tau_t: Option<f64>,
    /// Total computed bits; the mean over seeds on summary rows.
    pub objective: f64,
    /// Sample standard deviation over seeds (summary rows only).
    pub std: Option<f64>,
    /// Alternation rounds; the maximum over seeds on summary rows.
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    /// Largest constraint residual; the maximum over seeds on summary rows.
    pub max_residual: f64,
    /// Oracle objective (`oracle` rows).
    pub reference: Option<f64>,
    /// `(objective - reference) / reference`.
    pub gap: Option<f64>,
}

/// Mean and standard deviation of one series at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotPoint {
    pub mean: f64,
    pub std: f64,
}

/// Data for plotting: one column pair per series.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub x_name: &'static str,
    pub series: Vec<String>,
    pub x: Vec<f64>,
    /// `points[k][s]` is series `s` at `x[k]`.
    pub points: Vec<Vec<PlotPoint>>,
}

/// Result of one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rows: Vec<Row>,
    pub plot: PlotData,
}

impl Table {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_plot<W: Write>(&self, out: W) -> Result<()> {
        let p = &self.plot;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![p.x_name.to_string()];
        for s in &p.series {
            header.push(format!("{s}_mean"));
            header.push(format!("{s}_std"));
        }
        w.write_record(&header)?;
        for (x, pts) in p.x.iter().zip(&p.points) {
            let mut rec = vec![*x];
            for q in pts {
                rec.push(q.mean);
                rec.push(q.std);
            }
            w.serialize(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Write the CSV to `path` and the plot data next to it, or the CSV
    /// alone to `stdout` when there is no path.
    pub fn save(&self, path: Option<&Path>) -> Result<()> {
        match path {
            None => self.write_csv(std::io::stdout().lock()),
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                self.write_csv(std::fs::File::create(p)?)?;
                self.write_plot(std::fs::File::create(plot_path(p))?)
            }
        }
    }
}

/// `results/p0.csv` -> `results/p0.plot.csv`.
pub fn plot_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.plot.csv"))
}

/// Run `f` on a pool of `jobs` threads (all cores when `None` or zero).
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    Ok(pool.install(f))
}

/// System and channels of sweep value `k`, channel seed `seed`.
pub fn instance(cfg: &ExperimentConfig, k: usize, seed: u64) -> Result<(SystemParams, ChannelSet)> {
    let params = cfg.system_at(k);
    let placement = cfg.geometry.place(params.num_ues(), seed);
    let pl = crate::channel::PathLossParams { seed, ..cfg.path_loss.clone() };
    let channels = generate(&params, &placement, &pl)?;
    Ok((params, channels))
}

/// Optimize one cell: the charging-time search, or a single alternation
/// when the sweep fixes `tau0`.
pub fn solve_cell(cfg: &ExperimentConfig, k: usize, seed: u64, scheme: Scheme) -> Result<SolveReport> {
    let (params, channels) = instance(cfg, k, seed)?;
    let variant = scheme.variant(params.elements)?;
    match cfg.fixed_tau0(k) {
        Some(t) => alternate(&params, &channels, &variant, t, &cfg.solver),
        None => search_tau0(&params, &channels, &variant, cfg.tau0_step, &cfg.solver),
    }
}

fn mean_std(xs: &[f64]) -> PlotPoint {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    PlotPoint { mean, std: var.sqrt() }
}

fn base_row(cfg: &ExperimentConfig, kind: &'static str, k: usize, scheme: Scheme) -> Row {
    let p = cfg.system_at(k);
    Row {
        kind,
        protocol: scheme.name(),
        axis: cfg.axis.name(),
        value: cfg.values[k],
        seed: None,
        ap_power: p.ap_power,
        period: p.period,
        elements: p.elements,
        ues: p.num_ues(),
        cycles_per_bit: p.cycles_per_bit.iter().sum::<f64>() / p.num_ues() as f64,
        tau0: None,
        tau_r: None,
        tau_t: None,
        objective: 0.0,
        std: None,
        iterations: None,
        converged: None,
        max_residual: 0.0,
        reference: None,
        gap: None,
    }
}

fn report_row(mut row: Row, seed: u64, r: &SolveReport) -> Row {
    row.seed = Some(seed);
    row.tau0 = Some(r.alloc.tau0);
    if r.protocol == Protocol::Ts {
        row.tau_r = Some(r.alloc.tau_r);
        row.tau_t = Some(r.alloc.tau_t);
    }
    row.objective = r.total_bits();
    row.iterations = Some(r.iterations);
    row.converged = Some(r.converged);
    row.max_residual = r.report.residuals.max();
    row
}

/// Mean/std over a group of per-seed rows.
fn summary(group: &[Row]) -> Row {
    let mut s = group[0].clone();
    let objectives: Vec<f64> = group.iter().map(|r| r.objective).collect();
    let ms = mean_std(&objectives);
    s.kind = "summary";
    s.seed = None;
    s.tau0 = if group.iter().all(|r| r.tau0 == s.tau0) { s.tau0 } else { None };
    s.tau_r = None;
    s.tau_t = None;
    s.objective = ms.mean;
    s.std = Some(ms.std);
    s.iterations = group.iter().filter_map(|r| r.iterations).max();
    s.converged = Some(group.iter().all(|r| r.converged != Some(false)));
    s.max_residual = group.iter().map(|r| r.max_residual).fold(f64::NEG_INFINITY, f64::max);
    if group.iter().all(|r| r.reference.is_some()) {
        let refs: Vec<f64> = group.iter().filter_map(|r| r.reference).collect();
        let gaps: Vec<f64> = group.iter().filter_map(|r| r.gap).collect();
        s.reference = Some(mean_std(&refs).mean);
        s.gap = Some(mean_std(&gaps).mean);
    }
    s
}

/// Every `(value, protocol, seed)` index in output order.
fn cells(cfg: &ExperimentConfig, schemes: &[Scheme]) -> Vec<(usize, Scheme, u64)> {
    let mut out = Vec::new();
    for k in 0..cfg.values.len() {
        for s in schemes {
            for seed in &cfg.seeds {
                out.push((k, *s, *seed));
            }
        }
    }
    out
}

/// Collapse per-seed rows, grouped consecutively by `key`, into summaries
/// and plot points. `x` and `series` name each group's plot position.
fn assemble(
    rows: Vec<Row>,
    x_name: &'static str,
    key: impl Fn(&Row) -> (f64, String),
) -> Table {
    let mut out = Vec::with_capacity(rows.len() + rows.len() / 2);
    let mut xs: Vec<f64> = Vec::new();
    let mut series: Vec<String> = Vec::new();
    let mut cells: Vec<(f64, String, PlotPoint)> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let k = key(&rows[start]);
        let mut end = start + 1;
        while end < rows.len() && key(&rows[end]) == k {
            end += 1;
        }
        let s = summary(&rows[start..end]);
        out.extend_from_slice(&rows[start..end]);
        cells.push((k.0, k.1.clone(), PlotPoint { mean: s.objective, std: s.std.unwrap_or(0.0) }));
        out.push(s);
        if !xs.contains(&k.0) {
            xs.push(k.0);
        }
        if !series.contains(&k.1) {
            series.push(k.1);
        }
        start = end;
    }
    let nan = PlotPoint { mean: f64::NAN, std: f64::NAN };
    let mut points = vec![vec![nan; series.len()]; xs.len()];
    for (x, s, p) in cells {
        let i = xs.iter().position(|v| *v == x).expect("x recorded");
        let j = series.iter().position(|v| *v == s).expect("series recorded");
        points[i][j] = p;
    }
    Table { rows: out, plot: PlotData { x_name, series, x: xs, points } }
}

/// One row per (sweep value, seed, protocol) plus a summary row per
/// (sweep value, protocol).
pub fn run(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let cells = cells(cfg, &cfg.protocols);
    let rows: Vec<Row> = cells
        .par_iter()
        .map(|&(k, scheme, seed)| {
            let r = solve_cell(cfg, k, seed, scheme)?;
            Ok(report_row(base_row(cfg, "run", k, scheme), seed, &r))
        })
        .collect::<Result<_>>()?;
    Ok(assemble(rows, cfg.axis.name(), |r| (r.value, r.protocol.to_string())))
}

/// Objective against every grid charging time, for each sweep value, seed
/// and protocol.
pub fn curve(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    if cfg.axis == Axis::Tau0 {
        return Err(Error::Config("sweep.axis: curve already scans tau0; sweep another quantity".into()));
    }
    // Seeds innermost, so each (value, protocol, tau0) group is contiguous.
    let mut jobs = Vec::new();
    for k in 0..cfg.values.len() {
        let grid = tau0_grid(cfg.system_at(k).period, cfg.tau0_step)?;
        for scheme in &cfg.protocols {
            for t in &grid {
                for seed in &cfg.seeds {
                    jobs.push((k, *scheme, *t, *seed));
                }
            }
        }
    }
    let rows: Vec<Row> = jobs
        .par_iter()
        .map(|&(k, scheme, t, seed)| {
            let (params, channels) = instance(cfg, k, seed)?;
            let r = alternate(&params, &channels, &scheme.variant(params.elements)?, t, &cfg.solver)?;
            Ok(report_row(base_row(cfg, "curve", k, scheme), seed, &r))
        })
        .collect::<Result<_>>()?;
    let many = cfg.values.len() > 1;
    let axis = cfg.axis.name();
    Ok(assemble(rows, "tau0", |r| {
        let name = if many { format!("{}@{axis}={}", r.protocol, r.value) } else { r.protocol.to_string() };
        (r.tau0.expect("curve rows carry tau0"), name)
    }))
}

/// Optimizer against the exhaustive grid search on small instances. The
/// conventional baseline has no oracle and is skipped.
pub fn oracle(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let schemes: Vec<Scheme> = cfg.protocols.iter().copied().filter(|s| *s != Scheme::Conventional).collect();
    if schemes.is_empty() {
        return Err(Error::Config("protocols: the oracle needs at least one of es, ms, ts".into()));
    }
    let cells = cells(cfg, &schemes);
    let rows: Vec<Row> = cells
        .par_iter()
        .map(|&(k, scheme, seed)| {
            let (params, channels) = instance(cfg, k, seed)?;
            let protocol = match scheme {
                Scheme::Es => Protocol::Es,
                Scheme::Ms => Protocol::Ms,
                _ => Protocol::Ts,
            };
            let mut grids = cfg.oracle.clone();
            // The oracle must search the same charging times as the optimizer.
            if let Some(t) = cfg.fixed_tau0(k) {
                grids.tau0_step = t;
            }
            let reference = brute_force_small(&params, &channels, protocol, &grids)?.value;
            let r = solve_cell(cfg, k, seed, scheme)?;
            let mut row = report_row(base_row(cfg, "oracle", k, scheme), seed, &r);
            row.reference = Some(reference);
            row.gap = Some(if reference > 0.0 { (row.objective - reference) / reference } else { 0.0 });
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(assemble(rows, cfg.axis.name(), |r| (r.value, r.protocol.to_string())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            r#"
            protocols = ["es", "ts"]
            seeds = [3]
            [system]
            ues = 1
            elements = 2
            max_iterations = 3
            [solver]
            tau0_step = "250 ms"
            {extra}
            "#
        ))
        .unwrap()
    }

    #[test]
    fn one_value_one_seed_gives_a_row_and_a_summary_per_protocol() {
        let cfg = tiny("[sweep]\naxis = \"P0\"\nvalues = [\"1 W\"]");
        let t = run(&cfg).unwrap();
        let kinds: Vec<(&str, &str)> = t.rows.iter().map(|r| (r.kind, r.protocol)).collect();
        assert_eq!(kinds, [("run", "es"), ("summary", "es"), ("run", "ts"), ("summary", "ts")]);
        assert_eq!(t.rows[0].objective, t.rows[1].objective);
        assert_eq!(t.rows[1].std, Some(0.0));
        assert!(t.rows[0].max_residual <= 1e-6);
        assert_eq!(t.plot.series, ["es", "ts"]);
        assert_eq!(t.plot.x, [1.0]);
    }

    #[test]
    fn output_is_byte_identical_across_runs_and_pool_sizes() {
        let cfg = tiny("[sweep]\naxis = \"tau0\"\nvalues = [\"0.25 s\", \"0.5 s\"]");
        let bytes = |jobs| {
            let t = with_jobs(Some(jobs), || run(&cfg)).unwrap().unwrap();
            let mut v = Vec::new();
            t.write_csv(&mut v).unwrap();
            t.write_plot(&mut v).unwrap();
            v
        };
        let a = bytes(1);
        assert_eq!(a, bytes(2));
        assert_eq!(a, bytes(1));
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("kind,protocol,axis,value,seed,"));
    }

    #[test]
    fn curve_rows_follow_the_grid() {
        let cfg = tiny("[sweep]\naxis = \"P0\"\nvalues = [\"1 W\"]");
        let t = curve(&cfg).unwrap();
        let taus: Vec<f64> = t.rows.iter().filter(|r| r.kind == "curve" && r.protocol == "es").filter_map(|r| r.tau0).collect();
        assert_eq!(taus, [0.25, 0.5, 0.75]);
        assert_eq!(t.plot.x, [0.25, 0.5, 0.75]);
        assert_eq!(t.rows.len(), 2 * 3 * 2);
    }

    #[test]
    fn summaries_use_the_sample_deviation() {
        let p = mean_std(&[1.0, 3.0]);
        assert_eq!((p.mean, p.std), (2.0, 2f64.sqrt()));
    }

    #[test]
    fn plot_path_sits_next_to_the_csv() {
        assert_eq!(plot_path(Path::new("out/a.csv")), Path::new("out/a.plot.csv"));
        assert_eq!(plot_path(Path::new("a")), Path::new("a.plot.csv"));
    }
}
