//! Security analysis for continuous-variable quantum key distribution:
//! covariance-based key-rate bounds, entropy estimators, a Monte Carlo
//! simulator of entanglement-based sessions under non-Gaussian attacks, and
//! checks of the entropy inequalities the bounds rest on.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod info;
pub mod simulator;
pub mod verify;

pub use error::{Error, Result};
pub use info::{Covariance2, HeterodyneTransform, ProtocolKind, RateReport, ShotNoise};
