//! Verification instruments: Lyapunov/energy functionals, persistent
//! excitation, the Volterra transform used by backstepping, a modal Galerkin
//! solver for the observation-error system, and convergence diagnostics.

mod diagnostics;
mod galerkin;
mod pe;
mod transform;

pub use diagnostics::{
    energy_residual, l2_time_gap, limit_diagnostics, limit_diagnostics_samples, LimitSummary, QuantityLimit,
};
pub use galerkin::{galerkin_error_system, EigenPair, GalerkinConfig, ModalBasis};
pub use pe::{pe_check, PEVerdict, DEFAULT_PE_WINDOWS};
pub use transform::{pi_inverse, pi_transform, upsilon_b};

use thiserror::Error;

use crate::domain::{DomainError, GridFunction};
use crate::fdm;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("signal spans {available} s but {required} s are needed")]
    InsufficientDuration { required: f64, available: f64 },
    #[error("mode {mode} has sqrt(lambda)*dx = {resolution:.3} >= 1 and is not resolved by the grid")]
    UnresolvableMode { mode: usize, resolution: f64 },
    #[error("integration step {dt} is outside the RK4 stability interval for lambda = {lambda}")]
    UnstableStep { dt: f64, lambda: f64 },
    #[error("need at least one mode")]
    NoModes,
    #[error("times and values differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// (E, F, V) for an observation error (w̃, ζ̃):
/// E = ½‖w̃‖², F = E + (|b|/2)·ζ̃², and V = F.
pub fn energies(wtilde: &GridFunction, zetatilde: f64, b: f64) -> (f64, f64, f64) {
    let e = 0.5 * fdm::quad_slice(&squared(wtilde.values()), wtilde.grid().dx());
    let f = e + 0.5 * b.abs() * zetatilde * zetatilde;
    (e, f, f)
}

fn squared(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x * x).collect()
}
