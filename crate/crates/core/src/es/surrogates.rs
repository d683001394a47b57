//! First-order bounds used by the successive convex approximations.

use std::f64::consts::{LN_2, LOG2_E};

use crate::kernel::{leading_eig, CMatrix};
use crate::{Error, Result, C64};

/// `constant + gradient . (x - base)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineBound {
    pub constant: f64,
    pub gradient: Vec<f64>,
    pub base: Vec<f64>,
}

impl AffineBound {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant
            + self
                .gradient
                .iter()
                .zip(x.iter().zip(&self.base))
                .map(|(g, (v, b))| g * (v - b))
                .sum::<f64>()
    }
}

/// `log2(sum_{j in interferers} p_j g_j + noise)`: the interference term of
/// a UE's rate.
pub fn interference_log(power: &[f64], gains: &[f64], noise: f64, interferers: &[usize]) -> f64 {
    let total: f64 = interferers.iter().map(|&j| power[j] * gains[j]).sum::<f64>() + noise;
    total.log2()
}

/// Tangent plane of the (concave) interference term at `power`; it bounds
/// the term from above everywhere.
pub fn taylor_r(power: &[f64], gains: &[f64], noise: f64, interferers: &[usize]) -> AffineBound {
    let total: f64 = interferers.iter().map(|&j| power[j] * gains[j]).sum::<f64>() + noise;
    let mut gradient = vec![0.0; power.len()];
    for &j in interferers {
        gradient[j] = gains[j] / (LN_2 * total);
    }
    AffineBound { constant: total.log2(), gradient, base: power.to_vec() }
}

/// Tangent plane of the convex `log2(1 + 1/(A B))` at `(a0, b0)`, a global
/// lower bound in `(A, B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HatR {
    pub value: f64,
    pub slope_a: f64,
    pub slope_b: f64,
    pub a0: f64,
    pub b0: f64,
}

impl HatR {
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        self.value + self.slope_a * (a - self.a0) + self.slope_b * (b - self.b0)
    }

    /// `log2(e) / (1 + A0 B0)`: the slope in the scaled variables `A/A0`, `B/B0`.
    pub fn kappa(&self) -> f64 {
        LOG2_E / (1.0 + self.a0 * self.b0)
    }
}

pub fn hat_r_bound(a0: f64, b0: f64) -> Result<HatR> {
    if !(a0 > 0.0 && b0 > 0.0 && a0.is_finite() && b0.is_finite()) {
        return Err(Error::Domain(format!("expansion point ({a0}, {b0}) must be positive")));
    }
    let k = LOG2_E / (1.0 + a0 * b0);
    Ok(HatR {
        value: (1.0 / (a0 * b0)).ln_1p() / LN_2,
        slope_a: -k / a0,
        slope_b: -k / b0,
        a0,
        b0,
    })
}

/// Subgradient minorant of the spectral norm at `v_prev`:
/// `gamma(V) = u^H V u` with `u` the leading eigenvector of `v_prev`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankLinearization {
    pub norm: f64,
    pub direction: Vec<C64>,
}

impl RankLinearization {
    pub fn gamma(&self, v: &CMatrix) -> f64 {
        quadratic_form(v, &self.direction)
    }

    /// `Tr(V) - gamma(V)`, zero only when `V` is rank one along `direction`.
    pub fn residual(&self, v: &CMatrix) -> f64 {
        v.trace().re - self.gamma(v)
    }

    /// `I - u u^H`: the coefficient of the linear residual functional.
    pub fn residual_coefficient(&self) -> CMatrix {
        let n = self.direction.len();
        CMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            C64::new(id, 0.0) - self.direction[i] * self.direction[j].conj()
        })
    }
}

pub fn rank_linearization(v_prev: &CMatrix) -> RankLinearization {
    let (norm, direction) = leading_eig(v_prev);
    RankLinearization { norm, direction }
}

/// `u^H V u`.
pub fn quadratic_form(v: &CMatrix, u: &[C64]) -> f64 {
    let n = u.len();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        let row: C64 = (0..n).map(|j| v[(i, j)] * u[j]).sum();
        acc += u[i].conj() * row;
    }
    acc.re
}
