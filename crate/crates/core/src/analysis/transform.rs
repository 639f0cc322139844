//! The backstepping Volterra transform and the ζ-error map.
//!
//! (Πf)(x) = f(x) + q ∫₀ˣ e^{q(x-s)} f(s) ds,
//! (Π⁻¹g)(x) = g(x) - q ∫₀ˣ g(s) ds,
//! Υ_b(s) = 1/b - s.
//!
//! Both integrals use cumulative trapezoid sums on the field's grid.

use super::AnalysisError;
use crate::domain::{DomainError, GridFunction};

fn cumulative_trapezoid(values: &[f64], dx: f64) -> Vec<f64> {
    let mut acc = Vec::with_capacity(values.len());
    acc.push(0.0);
    for w in values.windows(2) {
        let prev = *acc.last().expect("seeded");
        acc.push(prev + 0.5 * dx * (w[0] + w[1]));
    }
    acc
}

pub fn pi_transform(f: &GridFunction, q: f64) -> Result<GridFunction, DomainError> {
    let grid = f.grid();
    // e^{q(x-s)} = e^{qx} e^{-qs}
    let damped: Vec<f64> = grid.nodes().zip(f.values()).map(|(s, v)| (-q * s).exp() * v).collect();
    let integral = cumulative_trapezoid(&damped, grid.dx());
    let values = grid
        .nodes()
        .zip(f.values())
        .zip(&integral)
        .map(|((x, v), i)| v + q * (q * x).exp() * i)
        .collect();
    GridFunction::from_values(grid, values)
}

pub fn pi_inverse(g: &GridFunction, q: f64) -> Result<GridFunction, DomainError> {
    let integral = cumulative_trapezoid(g.values(), g.grid().dx());
    let values = g.values().iter().zip(&integral).map(|(v, i)| v - q * i).collect();
    GridFunction::from_values(g.grid(), values)
}

/// Υ_b(s) = 1/b - s, an involution.
pub fn upsilon_b(s: f64, b: f64) -> Result<f64, AnalysisError> {
    if b == 0.0 || !b.is_finite() {
        return Err(DomainError::ZeroCoefficient(b).into());
    }
    Ok(1.0 / b - s)
}
