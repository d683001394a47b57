//! Oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use starmec::kernel::{CMatrix, LpProblem};

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Best vertex by Cramer's rule over every triple of tight rows.
pub fn vertex_oracle(lp: &LpProblem) -> Option<f64> {
    let mut rows: Vec<([f64; 3], f64)> =
        lp.constraints.iter().zip(&lp.bounds).map(|(c, d)| ([c[0], c[1], c[2]], *d)).collect();
    for j in 0..3 {
        let mut e = [0.0; 3];
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    for a in 0..rows.len() {
        for b in a + 1..rows.len() {
            for c in b + 1..rows.len() {
                let m = [rows[a].0, rows[b].0, rows[c].0];
                let rhs = [rows[a].1, rows[b].1, rows[c].1];
                let d = det3(m);
                if d.abs() < 1e-9 {
                    continue;
                }
                let x: Vec<f64> = (0..3)
                    .map(|k| {
                        let mut mk = m;
                        for r in 0..3 {
                            mk[r][k] = rhs[r];
                        }
                        det3(mk) / d
                    })
                    .collect();
                let feasible = rows.iter().all(|(row, bound)| {
                    row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= bound + 1e-9 * (1.0 + bound.abs())
                });
                if feasible {
                    let v: f64 = lp.objective.iter().zip(&x).map(|(p, q)| p * q).sum();
                    best = Some(best.map_or(v, |b: f64| b.max(v)));
                }
            }
        }
    }
    best
}

/// Largest eigenvalue through the real symmetric embedding `[[A, -B], [B, A]]`.
pub fn embedded_lambda_max(h: &CMatrix) -> f64 {
    let n = h.nrows();
    let real = nalgebra::DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    nalgebra::SymmetricEigen::new(real).eigenvalues.max()
}
