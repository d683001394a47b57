use starmec::baseline::conventional_ris_solve;
use starmec::channel::{generate, Geometry, PathLossParams};
use starmec::es::{alternate, search_tau0_es, SolveOptions, Variant};
use starmec::ms::solve_ms;
use starmec::ts::solve_ts;
use starmec::{ChannelSet, Direction, Protocol, Side, SystemParams};

fn instance(ues: usize, elements: usize, seed: u64) -> (SystemParams, ChannelSet) {
    let params = SystemParams::defaults(elements, ues);
    let placement = Geometry::default().place(ues, seed);
    let channels = generate(&params, &placement, &PathLossParams { seed, ..Default::default() }).unwrap();
    (params, channels)
}

fn opts() -> SolveOptions {
    SolveOptions { parallel: false, ..SolveOptions::default() }
}

fn assert_monotone(trace: &[f64], what: &str) {
    for w in trace.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-6), "{what}: {trace:?}");
    }
}

#[test]
fn fixed_charging_time_runs_are_monotone_and_feasible() {
    for seed in 0..3 {
        let (params, channels) = instance(2, 4, seed);
        for protocol in [Protocol::Es, Protocol::Ms, Protocol::Ts] {
            let r = alternate(&params, &channels, &Variant::star(protocol, 4), 0.4, &opts()).unwrap();
            assert_monotone(&r.trace, &format!("seed {seed} {protocol:?}"));
            assert!(r.report.feasible(1e-6), "{:?}", r.report.residuals);
            assert!(r.iterations <= params.max_iterations);
            assert_eq!(*r.trace.last().unwrap(), r.total_bits());
        }
    }
}

#[test]
fn energy_splitting_spends_the_harvest() {
    for seed in 0..3 {
        let (params, channels) = instance(3, 4, 10 + seed);
        let r = search_tau0_es(&params, &channels, 0.1, &opts()).unwrap();
        for (i, e) in r.report.residuals.energy.iter().enumerate() {
            assert!((-1e-3..=0.0).contains(e), "seed {seed} ue {i}: {e}");
        }
        assert_eq!(r.curve.len(), 9);
        assert!(r.curve.iter().all(|(_, v)| *v <= r.total_bits()));
    }
}

#[test]
fn protocol_structure_is_respected() {
    let (params, channels) = instance(2, 4, 5);
    let ms = solve_ms(&params, &channels, 0.25, &opts()).unwrap();
    assert!(!ms.report.binary_violation);
    for m in 0..4 {
        let r = ms.coeffs.element(Direction::Uplink, Side::Reflection, m).norm();
        assert!(r.abs() < 1e-12 || (r - 1.0).abs() < 1e-12, "element {m}: {r}");
    }

    let ts = solve_ts(&params, &channels, 0.25, &opts()).unwrap();
    assert!(ts.alloc.tau0 + ts.alloc.tau_r + ts.alloc.tau_t <= params.period * (1.0 + 1e-9));

    let cv = conventional_ris_solve(&params, &channels, 0.25, &opts()).unwrap();
    for m in 0..2 {
        assert_eq!(cv.coeffs.element(Direction::Downlink, Side::Transmission, m).norm(), 0.0);
        assert_eq!(cv.coeffs.element(Direction::Uplink, Side::Reflection, m + 2).norm(), 0.0);
    }
}

#[test]
fn solves_are_deterministic() {
    let (params, channels) = instance(2, 4, 9);
    let a = search_tau0_es(&params, &channels, 0.25, &SolveOptions::default()).unwrap();
    let b = search_tau0_es(&params, &channels, 0.25, &opts()).unwrap();
    assert_eq!(a, b);
}
