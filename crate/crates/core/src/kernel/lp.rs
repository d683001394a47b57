use nalgebra::{DMatrix, SVD};

use crate::{Error, Result};

/// `maximize a.x  s.t.  C x <= d,  x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Vec<f64>>,
    pub bounds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Indices of the rows tight at the returned vertex. Rows `0..C.len()`
    /// are the constraint rows, row `C.len() + j` is `x_j >= 0`.
    pub active: Vec<usize>,
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Solve the square system by Gaussian elimination with partial pivoting;
/// `None` when it is numerically singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-11 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Exact LP optimum by enumerating every vertex of the feasible polyhedron.
/// Ties are broken towards the lexicographically smallest point.
pub fn solve_lp(lp: &LpProblem) -> Result<LpSolution> {
    let n = lp.objective.len();
    if n == 0 {
        return Err(Error::Dimension("LP needs at least one variable".into()));
    }
    if lp.constraints.len() != lp.bounds.len() || lp.constraints.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("LP constraint matrix and bound vector disagree".into()));
    }
    let tol = 1e-10;
    // All rows as G x <= h, each scaled to unit max-norm.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(lp.constraints.len() + n);
    for (r, &d) in lp.constraints.iter().zip(&lp.bounds) {
        let s = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if s == 0.0 {
            if d < 0.0 {
                return Err(Error::Infeasible("zero row with negative bound".into()));
            }
            continue;
        }
        rows.push((r.iter().map(|v| v / s).collect(), d / s));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    let nrows = rows.len();
    let feasible = |x: &[f64]| {
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        rows.iter().all(|(g, h)| {
            let lhs: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
            lhs <= h + tol * scale.max(h.abs())
        })
    };

    let mut vertices: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for subset in combinations(nrows, n) {
        let a: Vec<Vec<f64>> = subset.iter().map(|&i| rows[i].0.clone()).collect();
        let b: Vec<f64> = subset.iter().map(|&i| rows[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if x.iter().all(|v| v.is_finite()) && feasible(&x) {
                vertices.push((x, subset));
            }
        }
    }
    if vertices.is_empty() {
        return Err(Error::Infeasible("no feasible vertex".into()));
    }

    // The recession cone lies in the nonnegative orthant, so it is pointed and
    // generated by its extreme rays: directions where n-1 independent
    // homogeneous rows are tight.
    let homogeneous: Vec<&Vec<f64>> = rows.iter().map(|(g, _)| g).collect();
    let obj_scale = lp.objective.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if n == 1 {
        if lp.objective[0] > tol * obj_scale && homogeneous.iter().all(|g| g[0] <= tol) {
            return Err(Error::Unbounded("objective grows along +x".into()));
        }
    } else {
        for subset in combinations(nrows, n - 1) {
            // Pad with a zero row so the SVD exposes the null direction.
            let m = DMatrix::from_fn(n, n, |r, c| if r < n - 1 { homogeneous[subset[r]][c] } else { 0.0 });
            let svd = SVD::new(m, false, true);
            let Some(vt) = svd.v_t else { continue };
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
            // Rank n-1: exactly one vanishing singular value.
            if svd.singular_values[order[1]] < 1e-10 {
                continue;
            }
            let null: Vec<f64> = (0..n).map(|c| vt[(order[0], c)]).collect();
            for sign in [1.0, -1.0] {
                let y: Vec<f64> = null.iter().map(|v| v * sign).collect();
                let in_cone = homogeneous
                    .iter()
                    .all(|g| g.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() <= 1e-10);
                let gain: f64 = lp.objective.iter().zip(&y).map(|(a, b)| a * b).sum();
                if in_cone && gain > 1e-10 * obj_scale {
                    return Err(Error::Unbounded("objective grows along a recession ray".into()));
                }
            }
        }
    }

    let value_of = |x: &[f64]| -> f64 { lp.objective.iter().zip(x).map(|(a, b)| a * b).sum() };
    let best = vertices.iter().map(|(x, _)| value_of(x)).fold(f64::NEG_INFINITY, f64::max);
    let tie = 1e-12 * best.abs().max(1.0);
    let mut winner: Option<&(Vec<f64>, Vec<usize>)> = None;
    for v in vertices.iter().filter(|(x, _)| value_of(x) >= best - tie) {
        winner = match winner {
            None => Some(v),
            Some(w) => {
                let smaller = v
                    .0
                    .iter()
                    .zip(&w.0)
                    .find(|(a, b)| (*a - *b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0))
                    .map(|(a, b)| a < b)
                    .unwrap_or(false);
                if smaller {
                    Some(v)
                } else {
                    Some(w)
                }
            }
        };
    }
    let (x, _) = winner.expect("at least one vertex");
    let mut x = x.clone();
    for v in x.iter_mut() {
        if v.abs() < 1e-15 {
            *v = 0.0;
        }
    }
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let active = rows
        .iter()
        .enumerate()
        .filter(|(_, (g, h))| {
            let lhs: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
            (lhs - h).abs() <= 1e-9 * scale.max(h.abs())
        })
        .map(|(i, _)| i)
        .collect();
    Ok(LpSolution { value: value_of(&x), x, active })
}
