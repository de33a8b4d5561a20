//! Simulation and analysis toolkit for a hybrid DC magnetometer that couples
//! a single shallow NV center to a soft-ferromagnetic giant-magnetoimpedance
//! (GMI) microwire.
//!
//! The crate generates synthetic experimental traces for the full protocol
//! family of such a sensor (ODMR, Rabi, Ramsey, Hahn echo, synchronized
//! echo magnetometry, noise-floor acquisition, coil calibration, wide-field
//! mapping) from first-principles models, and implements the analysis chain
//! that turns traces into sensitivities.

// validation deliberately uses the negated form `!(x > 0)`: it rejects NaN,
// which the non-negated `x <= 0` would silently accept
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constants;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod gmi;
pub mod presets;
pub mod rng;
pub mod sequence;
pub mod spin;
pub mod units;
pub mod widefield;

pub use error::{Error, Result};
