//! ADMM for `min/max c.x  s.t.  A x (=, <=, >=) b,  x in K` where `K` is a
//! product of Hermitian PSD cones, real symmetric PSD cones, nonnegative
//! scalars and free scalars.
//!
//! Blocks are vectorized isometrically: the diagonal first, then `sqrt(2)`
//! times the real and imaginary parts of the upper triangle, so the Euclidean
//! inner product of two vectors equals the trace inner product of the
//! matrices. The x-step is an exact projection onto the affine set; the
//! z-step projects each block onto its cone. Hermitian blocks are projected
//! through their real symmetric embedding.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{CMatrix, SolverSettings};
use crate::{Error, Result, C64};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Hermitian(usize),
    Symmetric(usize),
    NonNegative,
    Free,
}

impl Kind {
    fn len(self) -> usize {
        match self {
            Kind::Hermitian(n) => n * n,
            Kind::Symmetric(n) => n * (n + 1) / 2,
            Kind::NonNegative | Kind::Free => 1,
        }
    }
}

/// A real-linear functional of one block.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    /// `Re tr(C X)` of a Hermitian block; only the Hermitian part of `C` matters.
    Trace { block: BlockId, coeff: CMatrix },
    /// `w * Re X[i][j]` of a matrix block, or `w * x` of a scalar (`i = j = 0`).
    Entry { block: BlockId, i: usize, j: usize, weight: f64 },
}

impl Term {
    pub fn trace(block: BlockId, coeff: CMatrix) -> Term {
        Term::Trace { block, coeff }
    }

    pub fn entry(block: BlockId, i: usize, j: usize, weight: f64) -> Term {
        Term::Entry { block, i, j, weight }
    }

    pub fn scalar(block: BlockId, weight: f64) -> Term {
        Term::Entry { block, i: 0, j: 0, weight }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    terms: Vec<Term>,
    relation: Relation,
    rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    sense: Sense,
    kinds: Vec<Kind>,
    objective: Vec<Term>,
    rows: Vec<Row>,
}

/// Solver state that can seed a later solve of a problem with the same
/// block structure.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    z: Vec<f64>,
    u: Vec<f64>,
    rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Hermitian(CMatrix),
    Symmetric(DMatrix<f64>),
    Scalar(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    values: Vec<Value>,
    /// Objective in the caller's sense and scale.
    pub objective: f64,
    /// Largest violation of a constraint row after row normalization.
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Most negative eigenvalue over all matrix blocks.
    pub min_eigenvalue: f64,
    pub iterations: usize,
    pub converged: bool,
    warm: WarmStart,
}

impl SdpSolution {
    pub fn hermitian(&self, id: BlockId) -> &CMatrix {
        match &self.values[id.0] {
            Value::Hermitian(m) => m,
            other => panic!("block {} is not Hermitian: {other:?}", id.0),
        }
    }

    pub fn symmetric(&self, id: BlockId) -> &DMatrix<f64> {
        match &self.values[id.0] {
            Value::Symmetric(m) => m,
            other => panic!("block {} is not symmetric: {other:?}", id.0),
        }
    }

    pub fn scalar(&self, id: BlockId) -> f64 {
        match &self.values[id.0] {
            Value::Scalar(v) => *v,
            other => panic!("block {} is not scalar: {other:?}", id.0),
        }
    }

    pub fn warm_start(&self) -> WarmStart {
        self.warm.clone()
    }
}

impl WarmStart {
    /// Start with every variable at zero and the default penalty.
    pub fn cold(problem: &SdpProblem) -> Self {
        let (_, n) = problem.offsets();
        WarmStart { z: vec![0.0; n], u: vec![0.0; n], rho: f64::NAN }
    }

    /// Overwrite the primal value of a Hermitian block, keeping the duals.
    pub fn with_hermitian(mut self, problem: &SdpProblem, id: BlockId, value: &CMatrix) -> Result<Self> {
        let (off, n) = problem.offsets();
        match problem.kinds.get(id.0) {
            Some(Kind::Hermitian(k)) if *k == value.nrows() && value.is_square() => {
                if self.z.len() < n {
                    self.z.resize(n, 0.0);
                }
                pack_hermitian(value, &mut self.z[off[id.0]..off[id.0] + k * k]);
                Ok(self)
            }
            _ => Err(Error::Dimension(format!("block {} is not a {}x{} Hermitian block", id.0, value.nrows(), value.nrows()))),
        }
    }
}

fn herm_pair(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl SdpProblem {
    pub fn new(sense: Sense) -> Self {
        SdpProblem { sense, kinds: Vec::new(), objective: Vec::new(), rows: Vec::new() }
    }

    fn push(&mut self, k: Kind) -> BlockId {
        self.kinds.push(k);
        BlockId(self.kinds.len() - 1)
    }

    /// New `n x n` Hermitian PSD variable.
    pub fn hermitian(&mut self, n: usize) -> BlockId {
        self.push(Kind::Hermitian(n))
    }

    /// New `n x n` real symmetric PSD variable.
    pub fn symmetric(&mut self, n: usize) -> BlockId {
        self.push(Kind::Symmetric(n))
    }

    pub fn nonnegative(&mut self) -> BlockId {
        self.push(Kind::NonNegative)
    }

    pub fn free(&mut self) -> BlockId {
        self.push(Kind::Free)
    }

    pub fn add_objective(&mut self, term: Term) {
        self.objective.push(term);
    }

    pub fn constrain(&mut self, terms: Vec<Term>, relation: Relation, rhs: f64) {
        self.rows.push(Row { terms, relation, rhs });
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    fn offsets(&self) -> (Vec<usize>, usize) {
        let mut off = Vec::with_capacity(self.kinds.len());
        let mut n = 0;
        for k in &self.kinds {
            off.push(n);
            n += k.len();
        }
        (off, n)
    }

    fn scatter(&self, term: &Term, off: &[usize], out: &mut [f64]) -> Result<()> {
        let bad = |msg: String| Err(Error::Dimension(msg));
        match term {
            Term::Trace { block, coeff } => {
                let Some(Kind::Hermitian(n)) = self.kinds.get(block.0).copied() else {
                    return bad(format!("trace term on non-Hermitian block {}", block.0));
                };
                if coeff.nrows() != n || coeff.ncols() != n {
                    return bad(format!("trace coefficient is {}x{}, block is {n}x{n}", coeff.nrows(), coeff.ncols()));
                }
                let o = off[block.0];
                for i in 0..n {
                    out[o + i] += coeff[(i, i)].re;
                    for j in (i + 1)..n {
                        let h = (coeff[(i, j)] + coeff[(j, i)].conj()) * 0.5;
                        let k = o + n + 2 * herm_pair(n, i, j);
                        out[k] += SQRT2 * h.re;
                        out[k + 1] += SQRT2 * h.im;
                    }
                }
            }
            Term::Entry { block, i, j, weight } => {
                let (a, b) = ((*i).min(*j), (*i).max(*j));
                let Some(kind) = self.kinds.get(block.0).copied() else {
                    return bad(format!("unknown block {}", block.0));
                };
                let o = off[block.0];
                match kind {
                    Kind::Hermitian(n) | Kind::Symmetric(n) if b >= n => {
                        return bad(format!("entry ({i},{j}) outside {n}x{n} block"));
                    }
                    Kind::Hermitian(n) => {
                        if a == b {
                            out[o + a] += weight;
                        } else {
                            out[o + n + 2 * herm_pair(n, a, b)] += weight / SQRT2;
                        }
                    }
                    Kind::Symmetric(n) => {
                        if a == b {
                            out[o + a] += weight;
                        } else {
                            out[o + n + herm_pair(n, a, b)] += weight / SQRT2;
                        }
                    }
                    Kind::NonNegative | Kind::Free => {
                        if b != 0 {
                            return bad(format!("entry ({i},{j}) on a scalar block"));
                        }
                        out[o] += weight;
                    }
                }
            }
        }
        Ok(())
    }

    fn unpack(&self, off: &[usize], z: &[f64]) -> Vec<Value> {
        self.kinds
            .iter()
            .zip(off)
            .map(|(k, &o)| match *k {
                Kind::Hermitian(n) => Value::Hermitian(unpack_hermitian(n, &z[o..o + n * n])),
                Kind::Symmetric(n) => Value::Symmetric(unpack_symmetric(n, &z[o..o + k.len()])),
                Kind::NonNegative | Kind::Free => Value::Scalar(z[o]),
            })
            .collect()
    }
}

fn unpack_hermitian(n: usize, v: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(v[i], 0.0);
        for j in (i + 1)..n {
            let k = n + 2 * herm_pair(n, i, j);
            let z = C64::new(v[k], v[k + 1]) / SQRT2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

fn pack_hermitian(m: &CMatrix, v: &mut [f64]) {
    let n = m.nrows();
    for i in 0..n {
        v[i] = m[(i, i)].re;
        for j in (i + 1)..n {
            let k = n + 2 * herm_pair(n, i, j);
            v[k] = SQRT2 * m[(i, j)].re;
            v[k + 1] = SQRT2 * m[(i, j)].im;
        }
    }
}

fn unpack_symmetric(n: usize, v: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = v[i];
        for j in (i + 1)..n {
            let x = v[n + herm_pair(n, i, j)] / SQRT2;
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    m
}

fn pack_symmetric(m: &DMatrix<f64>, v: &mut [f64]) {
    let n = m.nrows();
    for i in 0..n {
        v[i] = m[(i, i)];
        for j in (i + 1)..n {
            v[n + herm_pair(n, i, j)] = SQRT2 * m[(i, j)];
        }
    }
}

/// Project a real symmetric matrix onto the PSD cone; returns the projection
/// and the smallest eigenvalue before clipping.
fn psd_project(m: DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let eig = SymmetricEigen::new(m);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let n = eig.eigenvalues.len();
    let mut p = DMatrix::zeros(n, n);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 0.0 {
            let q = eig.eigenvectors.column(k);
            p.ger(l, &q, &q, 1.0);
        }
    }
    (p, min)
}

fn project_block(kind: Kind, v: &mut [f64]) {
    match kind {
        Kind::Free => {}
        Kind::NonNegative => v[0] = v[0].max(0.0),
        Kind::Symmetric(2) => {
            let (a, d, b) = (v[0], v[1], v[2] / SQRT2);
            let mean = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            let (l1, l2) = (mean + rad, mean - rad);
            if l2 >= 0.0 {
                return;
            }
            if l1 <= 0.0 {
                v.iter_mut().for_each(|x| *x = 0.0);
                return;
            }
            // Rank-one part: l1 / (l1 - l2) * (W - l2 I).
            let s = l1 / (2.0 * rad);
            v[0] = s * (a - l2);
            v[1] = s * (d - l2);
            v[2] = SQRT2 * s * b;
        }
        Kind::Symmetric(n) => {
            let m = unpack_symmetric(n, v);
            let (p, min) = psd_project(m);
            if min < 0.0 {
                pack_symmetric(&p, v);
            }
        }
        Kind::Hermitian(n) => {
            let eig = SymmetricEigen::new(unpack_hermitian(n, v));
            if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
                return;
            }
            let mut h = CMatrix::zeros(n, n);
            for (k, &l) in eig.eigenvalues.iter().enumerate() {
                if l > 0.0 {
                    let q = eig.eigenvectors.column(k);
                    h.gerc(C64::new(l, 0.0), &q, &q, C64::new(1.0, 0.0));
                }
            }
            pack_hermitian(&h, v);
        }
    }
}

fn min_eigenvalue(values: &[Value]) -> f64 {
    values
        .iter()
        .map(|v| match v {
            Value::Hermitian(m) => {
                SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
            }
            Value::Symmetric(m) => {
                SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
            }
            Value::Scalar(_) => f64::INFINITY,
        })
        .fold(f64::INFINITY, f64::min)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solve with ADMM. On hitting the iteration cap the last iterate is returned
/// inside [`Error::NotConverged`].
pub fn solve_sdp(
    problem: &SdpProblem,
    warm: Option<&WarmStart>,
    settings: &SolverSettings,
) -> Result<SdpSolution> {
    let (mut off, nblock) = problem.offsets();
    let mut kinds = problem.kinds.clone();
    // Slack scalars for the inequality rows go after the user blocks.
    let mut n = nblock;
    let m = problem.rows.len();
    let mut slack = vec![None; m];
    for (r, row) in problem.rows.iter().enumerate() {
        if row.relation != Relation::Eq {
            slack[r] = Some(n);
            off.push(n);
            kinds.push(Kind::NonNegative);
            n += 1;
        }
    }

    let mut c = vec![0.0; n];
    for t in &problem.objective {
        problem.scatter(t, &off, &mut c)?;
    }
    if problem.sense == Sense::Maximize {
        c.iter_mut().for_each(|v| *v = -*v);
    }
    let c_scale = inf_norm(&c);
    let c_norm: Vec<f64> = if c_scale > 0.0 { c.iter().map(|v| v / c_scale).collect() } else { c.clone() };

    let mut a = DMatrix::<f64>::zeros(m, n);
    let mut b = DVector::<f64>::zeros(m);
    let mut row = vec![0.0; n];
    for (r, rr) in problem.rows.iter().enumerate() {
        row.iter_mut().for_each(|v| *v = 0.0);
        for t in &rr.terms {
            problem.scatter(t, &off, &mut row)?;
        }
        match (rr.relation, slack[r]) {
            (Relation::Le, Some(s)) => row[s] = 1.0,
            (Relation::Ge, Some(s)) => row[s] = -1.0,
            _ => {}
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            if rr.rhs.abs() > 0.0 {
                return Err(Error::Infeasible(format!("constraint {r} has no terms but rhs {}", rr.rhs)));
            }
            continue;
        }
        for (k, v) in row.iter().enumerate() {
            a[(r, k)] = v / norm;
        }
        b[r] = rr.rhs / norm;
    }

    // Affine projection data: P(v) = v - A^T (A A^T)^+ (A v - b).
    let gram = &a * a.transpose();
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut inv = DMatrix::<f64>::zeros(m, m);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 1e-12 * top.max(1e-300) {
            let q = eig.eigenvectors.column(k);
            inv.ger(1.0 / l, &q, &q, 1.0);
        }
    }
    let at = a.transpose();
    let project_affine = |v: &DVector<f64>| -> DVector<f64> {
        let r = &a * v - &b;
        v - &at * (&inv * r)
    };

    let mut z = DVector::<f64>::zeros(n);
    let mut u = DVector::<f64>::zeros(n);
    let mut rho = settings.sdp_rho;
    if let Some(w) = warm {
        let k = w.z.len().min(n);
        z.as_mut_slice()[..k].copy_from_slice(&w.z[..k]);
        let k = w.u.len().min(n);
        u.as_mut_slice()[..k].copy_from_slice(&w.u[..k]);
        if w.rho.is_finite() && w.rho > 0.0 {
            rho = w.rho;
        }
    }
    let c_vec = DVector::from_vec(c_norm);
    let alpha = settings.sdp_alpha;
    let mut iterations = 0;
    let mut converged = false;
    let mut s_norm = f64::INFINITY;
    let mut last_obj = f64::NAN;
    let check_every = 10;
    let adapt_every = 50;

    while iterations < settings.sdp_max_iter {
        iterations += 1;
        let v = &z - &u - &c_vec / rho;
        let x = project_affine(&v);
        let xh = &x * alpha + &z * (1.0 - alpha);
        let mut zn = &xh + &u;
        for (k, &o) in kinds.iter().zip(&off) {
            project_block(*k, &mut zn.as_mut_slice()[o..o + k.len()]);
        }
        u += &xh - &zn;
        let dz = &zn - &z;
        z = zn;

        if iterations % check_every == 0 || iterations == settings.sdp_max_iter {
            let ax = &a * &z - &b;
            let pr = inf_norm(ax.as_slice());
            let du = rho * inf_norm(dz.as_slice());
            let scale_d = 1.0 + rho * inf_norm(u.as_slice());
            s_norm = du / scale_d;
            let obj = c_vec.dot(&z);
            let stalled = (obj - last_obj).abs() <= settings.sdp_stall_tol * obj.abs().max(1.0);
            last_obj = obj;
            if pr <= settings.sdp_primal_tol && s_norm <= settings.sdp_dual_tol && stalled {
                converged = true;
                break;
            }
            if iterations % adapt_every == 0 {
                // Balance the two residuals against their tolerances.
                let ratio = ((pr / settings.sdp_primal_tol) / (s_norm / settings.sdp_dual_tol).max(1e-300)).sqrt();
                if !(0.2..=5.0).contains(&ratio) && ratio.is_finite() {
                    let f = ratio.clamp(1e-3, 1e3);
                    rho *= f;
                    u /= f;
                }
            }
        }
    }

    let primal_residual = inf_norm((&a * &z - &b).as_slice());
    let values = problem.unpack(&off[..problem.kinds.len()], &z.as_slice()[..nblock]);
    let mut obj = vec![0.0; n];
    for t in &problem.objective {
        problem.scatter(t, &off, &mut obj)?;
    }
    let objective = obj.iter().zip(z.iter()).map(|(p, q)| p * q).sum::<f64>();
    let min_eig = min_eigenvalue(&values);
    let sol = SdpSolution {
        values,
        objective,
        primal_residual,
        dual_residual: s_norm,
        min_eigenvalue: min_eig,
        iterations,
        converged,
        warm: WarmStart { z: z.as_slice().to_vec(), u: u.as_slice().to_vec(), rho },
    };
    if converged {
        Ok(sol)
    } else {
        Err(Error::NotConverged(Box::new(sol)))
    }
}
