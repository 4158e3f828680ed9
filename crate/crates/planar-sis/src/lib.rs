//! SIS epidemics on planar Poisson point processes with far-random-waypoint motion.
//!
//! The crate bundles an exact event-driven simulator on the torus, estimators over its
//! output, moment-closure heuristics, integral-equation and polynomial solvers for the
//! stationary infected fraction, closed-form critical values and Boolean-model helpers.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closures;
pub mod error;
pub mod functional;
pub mod geometry;
pub mod par;
pub mod percolation;
pub mod phase;
pub mod polynomial;
pub mod quadrature;
pub mod radial;
pub mod rng;
pub mod simulator;
pub mod statistics;

pub use error::{Error, Result};
pub use geometry::{ModelParams, Position, TorusDomain};
