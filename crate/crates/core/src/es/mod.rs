//! Energy-splitting protocol optimizer.

mod alternate;
mod coeff;
mod options;
mod resource;
mod surrogates;
mod value;

pub use alternate::{
    alternate, alternate_es, initial_allocation, initial_coefficients, search_tau0, search_tau0_es, tau0_grid,
    SolveReport,
};
pub(crate) use alternate::repair_allocation;
pub use coeff::{coeff_step, coeff_step_warm, lifted_gain, CoeffOutcome, CoeffWarmStart, LiftedCoefficients};
pub use options::{PenaltySettings, SolveOptions, Variant};
pub use resource::{resource_step, ResourceOutcome, ResourceSubproblem};
pub use surrogates::*;
pub use value::{EnergyUse, EnergyValue};
