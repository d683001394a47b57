use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starmec::kernel::{solve_lp, solve_sdp, CMatrix, LpProblem, Relation, SdpProblem, Sense, SolverSettings, Term};
use starmec::C64;

mod common;
use common::{embedded_lambda_max, vertex_oracle};

#[test]
fn lp_matches_vertex_enumeration_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let rows = rng.gen_range(1..6);
        let mut constraints: Vec<Vec<f64>> = (0..rows).map(|_| (0..3).map(|_| rng.gen_range(-1.0..2.0)).collect()).collect();
        let mut bounds: Vec<f64> = (0..rows).map(|_| rng.gen_range(0.0..3.0)).collect();
        // A bounding row keeps every instance bounded.
        constraints.push(vec![1.0; 3]);
        bounds.push(rng.gen_range(1.0..10.0));
        let lp = LpProblem { objective: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(), constraints, bounds };
        let ours = solve_lp(&lp).unwrap();
        let oracle = vertex_oracle(&lp).expect("origin is feasible");
        assert!((ours.value - oracle).abs() <= 1e-8 * (1.0 + oracle.abs()), "case {case}: {} vs {oracle}", ours.value);
    }
}

fn tight() -> SolverSettings {
    SolverSettings { sdp_primal_tol: 1e-9, sdp_dual_tol: 1e-9, sdp_stall_tol: 1e-10, ..Default::default() }
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&a + a.adjoint()).scale(0.5)
}

#[test]
fn sdp_rayleigh_quotient_matches_eigenvalue() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for n in [2, 3, 4, 6] {
        let h = random_hermitian(n, &mut rng);
        let mut p = SdpProblem::new(Sense::Maximize);
        let v = p.hermitian(n);
        p.add_objective(Term::trace(v, h.clone()));
        p.constrain(vec![Term::trace(v, CMatrix::identity(n, n))], Relation::Eq, 1.0);
        let s = solve_sdp(&p, None, &tight()).unwrap();
        let oracle = embedded_lambda_max(&h);
        assert!((s.objective - oracle).abs() <= 1e-6, "n={n}: {} vs {oracle}", s.objective);
    }
}

#[test]
fn sdp_trace_minimization_matches_closed_form() {
    // min Tr(V)  s.t.  a^H V a >= 1  ->  1 / |a|^2.
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for n in [2, 3, 5] {
        let a: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let aa = CMatrix::from_fn(n, n, |i, j| a[i] * a[j].conj());
        let mut p = SdpProblem::new(Sense::Minimize);
        let v = p.hermitian(n);
        p.add_objective(Term::trace(v, CMatrix::identity(n, n)));
        p.constrain(vec![Term::trace(v, aa)], Relation::Ge, 1.0);
        let s = solve_sdp(&p, None, &tight()).unwrap();
        let oracle = 1.0 / a.iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert!((s.objective - oracle).abs() <= 1e-6, "n={n}: {} vs {oracle}", s.objective);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_solution_is_feasible_and_not_beaten_by_samples(
        obj in prop::collection::vec(-1.0..1.0f64, 3),
        rows in prop::collection::vec((prop::collection::vec(0.1..2.0f64, 3), 0.5..3.0f64), 1..5),
        samples in prop::collection::vec(prop::collection::vec(0.0..3.0f64, 3), 50),
    ) {
        let lp = LpProblem {
            objective: obj.clone(),
            constraints: rows.iter().map(|r| r.0.clone()).collect(),
            bounds: rows.iter().map(|r| r.1).collect(),
        };
        let sol = solve_lp(&lp).unwrap();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        for (row, d) in lp.constraints.iter().zip(&lp.bounds) {
            prop_assert!(dot(row, &sol.x) <= d + 1e-9);
        }
        prop_assert!(sol.x.iter().all(|x| *x >= -1e-12));
        for x in &samples {
            if lp.constraints.iter().zip(&lp.bounds).all(|(row, d)| dot(row, x) <= *d) {
                prop_assert!(dot(&obj, x) <= sol.value + 1e-9);
            }
        }
    }
}
