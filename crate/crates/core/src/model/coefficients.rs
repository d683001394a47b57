use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Direction, Side};
use crate::C64;

/// How the uplink uses the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UplinkOperation {
    /// Both beams exist at once with amplitudes summing to one per element.
    Simultaneous,
    /// Two slots, each with every element at unit amplitude in one mode.
    TimeSwitched,
}

/// Structural restriction of one element in one direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementMode {
    Split,
    ReflectOnly,
    TransmitOnly,
    /// Unit amplitude in both modes (time-switched uplink).
    Unit,
}

impl ElementMode {
    /// Fixed amplitudes, or `None` when the split is free.
    pub fn fixed(self) -> Option<[f64; 2]> {
        match self {
            ElementMode::Split => None,
            ElementMode::ReflectOnly => Some([1.0, 0.0]),
            ElementMode::TransmitOnly => Some([0.0, 1.0]),
            ElementMode::Unit => Some([1.0, 1.0]),
        }
    }
}

/// Per-element amplitudes `beta` and phases `theta`, indexed
/// `[direction][side][element]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarCoefficients {
    pub beta: [[Vec<f64>; 2]; 2],
    pub theta: [[Vec<f64>; 2]; 2],
    pub uplink: UplinkOperation,
}

impl StarCoefficients {
    /// Even split, zero phase.
    pub fn uniform(elements: usize) -> Self {
        let half = || vec![0.5; elements];
        let zero = || vec![0.0; elements];
        StarCoefficients {
            beta: [[half(), half()], [half(), half()]],
            theta: [[zero(), zero()], [zero(), zero()]],
            uplink: UplinkOperation::Simultaneous,
        }
    }

    /// Even split with independent uniform phases on every element and beam.
    pub fn random_phases<R: Rng>(elements: usize, rng: &mut R) -> Self {
        let mut c = Self::uniform(elements);
        for dir in &mut c.theta {
            for side in dir.iter_mut() {
                for t in side.iter_mut() {
                    *t = rng.gen_range(0.0..TAU);
                }
            }
        }
        c
    }

    /// Apply a per-element structural layout to one direction, overwriting the
    /// amplitudes of restricted elements.
    pub fn apply_layout(&mut self, direction: Direction, layout: &[ElementMode]) {
        let d = direction.index();
        for (m, mode) in layout.iter().enumerate() {
            if let Some([r, t]) = mode.fixed() {
                self.beta[d][0][m] = r;
                self.beta[d][1][m] = t;
            }
        }
        if direction == Direction::Uplink && layout.iter().all(|m| *m == ElementMode::Unit) {
            self.uplink = UplinkOperation::TimeSwitched;
        }
    }

    pub fn elements(&self) -> usize {
        self.beta[0][0].len()
    }

    /// `sqrt(beta) * exp(j theta)` of one element.
    pub fn element(&self, direction: Direction, side: Side, m: usize) -> C64 {
        let (d, k) = (direction.index(), side.index());
        C64::from_polar(self.beta[d][k][m].max(0.0).sqrt(), self.theta[d][k][m])
    }

    /// Diagonal of the coefficient matrix for one beam.
    pub fn vector(&self, direction: Direction, side: Side) -> Vec<C64> {
        (0..self.elements()).map(|m| self.element(direction, side, m)).collect()
    }

    /// Largest distance of an uplink amplitude from {0, 1}.
    pub fn uplink_binariness(&self) -> f64 {
        self.beta[1]
            .iter()
            .flatten()
            .map(|b| b.min(1.0 - b).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Round uplink amplitudes to a binary assignment: reflection wins when
    /// its amplitude is at least one half.
    pub fn round_uplink(&mut self) {
        let m = self.elements();
        for e in 0..m {
            let r = if self.beta[1][0][e] >= 0.5 { 1.0 } else { 0.0 };
            self.beta[1][0][e] = r;
            self.beta[1][1][e] = 1.0 - r;
        }
    }

    /// Wrap every phase into `[0, 2 pi)`.
    pub fn wrap_phases(&mut self) {
        for t in self.theta.iter_mut().flatten().flatten() {
            *t = t.rem_euclid(TAU);
            if *t >= TAU {
                *t = 0.0;
            }
        }
    }
}
