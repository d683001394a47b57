//! Mode-switching protocol: every uplink element either reflects or
//! transmits. The binary constraint `beta (beta - 1) = 0` enters the
//! coefficient step as a penalty; being convex, it is bounded below by its
//! tangent.

use crate::es::{coeff_step, search_tau0, CoeffOutcome, SolveOptions, SolveReport, Variant};
use crate::model::{AllocationState, ChannelSet, Protocol, StarCoefficients, SystemParams};
use crate::{Error, Result};

/// Tangent `(2 b0 - 1) beta - b0^2` of `beta (beta - 1)` at `b0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyBound {
    pub slope: f64,
    pub constant: f64,
}

impl PenaltyBound {
    pub fn eval(&self, beta: f64) -> f64 {
        self.slope * beta + self.constant
    }
}

pub fn ms_penalty_bound(beta0: f64) -> Result<PenaltyBound> {
    if !(0.0..=1.0).contains(&beta0) {
        return Err(Error::Domain(format!("amplitude {beta0} outside [0, 1]")));
    }
    Ok(PenaltyBound { slope: 2.0 * beta0 - 1.0, constant: -beta0 * beta0 })
}

/// Coefficient step with the binary penalty; the returned uplink amplitudes
/// are rounded.
pub fn ms_coeff_step(
    params: &SystemParams,
    channels: &ChannelSet,
    alloc: &AllocationState,
    start: &StarCoefficients,
    opts: &SolveOptions,
) -> Result<CoeffOutcome> {
    coeff_step(params, channels, alloc, start, &Variant::star(Protocol::Ms, channels.elements()), opts)
}

/// Mode-switching optimum over the charging-time grid.
pub fn solve_ms(params: &SystemParams, channels: &ChannelSet, step: f64, opts: &SolveOptions) -> Result<SolveReport> {
    search_tau0(params, channels, &Variant::star(Protocol::Ms, channels.elements()), step, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_at_binary_points() {
        for b in [0.0, 1.0] {
            assert_eq!(ms_penalty_bound(b).unwrap().eval(b), 0.0);
        }
        // Tangent at one half is the constant -1/4.
        let s = ms_penalty_bound(0.5).unwrap();
        assert_eq!((s.eval(0.0), s.eval(1.0)), (-0.25, -0.25));
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(ms_penalty_bound(1.5).is_err());
        assert!(ms_penalty_bound(-0.1).is_err());
    }

    proptest! {
        #[test]
        fn bound_is_tight_and_below(b0 in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let s = ms_penalty_bound(b0).unwrap();
            prop_assert!((s.eval(b0) - b0 * (b0 - 1.0)).abs() <= 1e-12);
            prop_assert!(s.eval(b) <= b * (b - 1.0) + 1e-15);
        }
    }
}
