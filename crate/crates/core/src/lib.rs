//! Adaptive boundary control of the unstable heat equation
//! w_t = w_xx, w_x(0) = -q w(0), w_x(1) = b u with unknown b.
//!
//! The controller factors u = ζ u₀: an observer driven by the two boundary
//! measurements supplies u₀ through a backstepping law, and ζ estimates 1/b.

pub mod analysis;
pub mod control;
pub mod domain;
pub mod fdm;
pub mod scenarios;
pub mod cli;
