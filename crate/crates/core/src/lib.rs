//! Hybrid explicit/implicit MPC motion cueing for a 4-DoF motion platform.
//!
//! An offline piecewise-affine controller ([`explicit`]) supplies the initial
//! guess for an online nonlinear MPC ([`implicit`]) that tracks the reference
//! specific force under tilt-rate, workspace and braking constraints.

#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod constraints;
pub mod error;
pub mod explicit;
pub mod implicit;
pub mod model;
pub mod qp;
pub mod scenarios;

pub use error::{CueingError, Result};
