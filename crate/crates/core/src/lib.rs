//! Importance-sampling estimators for excursion probabilities of Gaussian
//! random fields.
//!
//! The crate estimates `w(b) = P(sup_T f > b)` and conditional expectations
//! `E[Γ(f) | sup_T f > b]` for Gaussian fields on hyperrectangles. Three
//! estimators are provided:
//!
//! * [`estimators::finite`]: exceedance-weighted mixture sampling for a field
//!   observed at a fixed, finite set of points.
//! * [`estimators::holder`]: the same mixture on fresh i.i.d. uniform points
//!   with an undershoot level `b - a/b`, for Hölder-continuous fields.
//! * [`estimators::smooth`]: uniform mixture on a θ-regular lattice for smooth
//!   homogeneous fields.
//!
//! Crude Monte Carlo ([`estimators::naive`]) is kept alongside as an oracle.
//! Every random quantity is drawn from a counter-derived stream (see
//! [`rng`]), so results depend only on the configuration and master seed.

pub mod cli;
pub mod discretization;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod field;
pub mod gaussian;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
