//! Joint resource allocation and surface configuration for STAR-RIS assisted
//! wireless-powered mobile edge computing.
//!
//! An access point charges a set of user equipments (UEs) over the air for
//! `tau0` seconds; the UEs then split their harvested energy between local
//! computation and NOMA uplink offloading. A simultaneously transmitting and
//! reflecting surface (STAR-RIS) sits between the AP and the UEs, which live
//! on either side of it. The crate maximizes the total number of computed
//! bits under three surface protocols:
//!
//! * energy splitting ([`es`]): every element splits power between the
//!   reflected and transmitted beams,
//! * mode switching ([`ms`]): every element either reflects or transmits,
//! * time splitting ([`ts`]): the whole surface alternates between modes.
//!
//! [`baseline`] holds the conventional reflect-only + transmit-only surface
//! baseline and brute-force oracles, [`experiment`] the Monte-Carlo harness
//! behind the `starmec` binary.

pub mod baseline;
pub mod channel;
pub mod error;
pub mod es;
pub mod experiment;
pub mod kernel;
pub mod model;
pub mod ms;
pub mod ts;

pub use error::{Error, Result};
pub use model::*;

/// Complex sample type used for channels and surface coefficients.
pub type C64 = num_complex::Complex64;
