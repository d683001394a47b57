use nalgebra::{Cholesky, DMatrix, DVector};

use super::SolverSettings;
use crate::{Error, Result};

/// A concave objective maximized over a box and convex `g_j(x) <= 0` rows.
/// Callbacks only need to be valid in the interior of the feasible set.
/// The barrier schedule assumes the objective is scaled to order one.
pub trait SmoothConcaveProblem {
    fn dim(&self) -> usize;
    /// Lower and upper bounds; infinite entries are dropped.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn objective(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], g: &mut [f64]);
    /// Writes the (negative semidefinite) Hessian into a zeroed matrix.
    fn hessian(&self, x: &[f64], h: &mut DMatrix<f64>);

    fn num_constraints(&self) -> usize {
        0
    }
    fn constraint(&self, _j: usize, _x: &[f64]) -> f64 {
        0.0
    }
    fn constraint_gradient(&self, _j: usize, _x: &[f64], _g: &mut [f64]) {}
    /// Writes the (positive semidefinite) Hessian of row `j` into a zeroed matrix.
    fn constraint_hessian(&self, _j: usize, _x: &[f64], _h: &mut DMatrix<f64>) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Max of the relative stationarity residual and the duality gap.
    pub kkt_residual: f64,
    pub newton_steps: usize,
    pub converged: bool,
}

struct Barrier<'a, P: SmoothConcaveProblem> {
    p: &'a P,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl<P: SmoothConcaveProblem> Barrier<'_, P> {
    fn count(&self) -> usize {
        self.p.num_constraints()
            + self.lo.iter().filter(|v| v.is_finite()).count()
            + self.hi.iter().filter(|v| v.is_finite()).count()
    }

    fn strictly_feasible(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
            && x.iter().zip(&self.lo).all(|(v, l)| v > l)
            && x.iter().zip(&self.hi).all(|(v, h)| v < h)
            && (0..self.p.num_constraints()).all(|j| self.p.constraint(j, x) < 0.0)
    }

    /// Barrier function value, or `None` outside the interior.
    fn value(&self, t: f64, x: &[f64]) -> Option<f64> {
        if !self.strictly_feasible(x) {
            return None;
        }
        let mut f = -t * self.p.objective(x);
        for j in 0..self.p.num_constraints() {
            f -= (-self.p.constraint(j, x)).ln();
        }
        for (i, v) in x.iter().enumerate() {
            if self.lo[i].is_finite() {
                f -= (v - self.lo[i]).ln();
            }
            if self.hi[i].is_finite() {
                f -= (self.hi[i] - v).ln();
            }
        }
        f.is_finite().then_some(f)
    }

    /// Gradient and Hessian of the barrier function; also returns the
    /// objective gradient for the KKT check.
    fn derivatives(&self, t: f64, x: &[f64]) -> (DVector<f64>, DMatrix<f64>, DVector<f64>) {
        let n = x.len();
        let mut og = vec![0.0; n];
        self.p.gradient(x, &mut og);
        let mut oh = DMatrix::zeros(n, n);
        self.p.hessian(x, &mut oh);
        let mut g = DVector::from_iterator(n, og.iter().map(|v| -t * v));
        let mut h = oh * (-t);
        let mut cg = vec![0.0; n];
        let mut ch = DMatrix::zeros(n, n);
        for j in 0..self.p.num_constraints() {
            let s = -self.p.constraint(j, x);
            cg.iter_mut().for_each(|v| *v = 0.0);
            ch.fill(0.0);
            self.p.constraint_gradient(j, x, &mut cg);
            self.p.constraint_hessian(j, x, &mut ch);
            let cgv = DVector::from_column_slice(&cg);
            g += &cgv / s;
            h += &ch / s;
            h += (&cgv * cgv.transpose()) / (s * s);
        }
        for i in 0..n {
            if self.lo[i].is_finite() {
                let s = x[i] - self.lo[i];
                g[i] -= 1.0 / s;
                h[(i, i)] += 1.0 / (s * s);
            }
            if self.hi[i].is_finite() {
                let s = self.hi[i] - x[i];
                g[i] += 1.0 / s;
                h[(i, i)] += 1.0 / (s * s);
            }
        }
        (g, h, DVector::from_vec(og))
    }
}

fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> DVector<f64> {
    let n = g.len();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut damping = 0.0;
    loop {
        let mut hd = h.clone();
        for i in 0..n {
            hd[(i, i)] += damping;
        }
        if let Some(ch) = Cholesky::new(hd) {
            return -ch.solve(g);
        }
        damping = if damping == 0.0 { 1e-12 * scale } else { damping * 10.0 };
    }
}

/// Maximize a smooth concave program with a primal log-barrier method and
/// damped Newton steps. `start` must be strictly feasible; otherwise the box
/// centre is tried before giving up.
pub fn solve_smooth<P: SmoothConcaveProblem>(
    problem: &P,
    start: &[f64],
    settings: &SolverSettings,
) -> Result<SmoothSolution> {
    let n = problem.dim();
    let (lo, hi) = problem.bounds();
    if start.len() != n || lo.len() != n || hi.len() != n {
        return Err(Error::Dimension(format!(
            "problem has {n} variables, start {} and bounds {}/{}",
            start.len(),
            lo.len(),
            hi.len()
        )));
    }
    let b = Barrier { p: problem, lo, hi };
    let mut x = start.to_vec();
    if !b.strictly_feasible(&x) {
        let centre: Vec<f64> = (0..n)
            .map(|i| match (b.lo[i].is_finite(), b.hi[i].is_finite()) {
                (true, true) => 0.5 * (b.lo[i] + b.hi[i]),
                (true, false) => b.lo[i] + 1.0,
                (false, true) => b.hi[i] - 1.0,
                (false, false) => 0.0,
            })
            .collect();
        if !b.strictly_feasible(&centre) {
            return Err(Error::Infeasible("no strictly feasible starting point".into()));
        }
        x = centre;
    }

    let m = b.count() as f64;
    let mut t = 1.0;
    let mut steps = 0;
    let tol = settings.smooth_kkt_tol;
    let kkt = |x: &[f64], t: f64| -> f64 {
        let (g, _, og) = b.derivatives(t, x);
        let stationarity = g.amax() / t / og.amax().max(1.0);
        let gap = if m > 0.0 { m / t / problem.objective(x).abs().max(1.0) } else { 0.0 };
        stationarity.max(gap)
    };
    loop {
        // Centering.
        for _ in 0..100 {
            if steps >= settings.smooth_max_newton {
                break;
            }
            let (g, h, _) = b.derivatives(t, &x);
            let dx = newton_direction(&g, &h);
            let decrement = -g.dot(&dx);
            if !(decrement > 1e-20) {
                break;
            }
            steps += 1;
            let f0 = b.value(t, &x).expect("iterate stays interior");
            let slope = g.dot(&dx);
            let mut s = 1.0;
            let mut moved = false;
            while s > 1e-16 {
                let cand: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + s * d).collect();
                if let Some(f1) = b.value(t, &cand) {
                    if f1 <= f0 + 0.25 * s * slope + 4.0 * f64::EPSILON * f0.abs() {
                        x = cand;
                        moved = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !moved || decrement < 1e-14 {
                break;
            }
        }
        let done = m == 0.0 || m / t <= 0.1 * tol * problem.objective(&x).abs().max(1.0);
        if done || steps >= settings.smooth_max_newton {
            break;
        }
        t *= 10.0;
    }
    let kkt_residual = kkt(&x, t);
    Ok(SmoothSolution {
        value: problem.objective(&x),
        converged: kkt_residual <= tol,
        x,
        kkt_residual,
        newton_steps: steps,
    })
}
