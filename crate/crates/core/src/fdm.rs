//! Explicit finite differences for u_t = u_xx + s on [0, 1] with prescribed
//! boundary fluxes, and trapezoid quadrature on the same grid.
//!
//! Boundary nodes use ghost values u_{-1} = u_1 - 2 dx u_x(0) and
//! u_n = u_{n-2} + 2 dx u_x(1). Robin conditions are imposed by the caller,
//! which evaluates the flux from the current boundary value.

use thiserror::Error;

use crate::domain::{DomainError, GridFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FdmError {
    #[error("state became non-finite at node {index}")]
    NonFiniteState { index: usize },
    #[error("non-finite boundary flux ({left}, {right})")]
    NonFiniteFlux { left: f64, right: f64 },
    #[error("source term lives on a different grid")]
    GridMismatch,
}

/// Values of ∂ₓu at x = 0 and x = 1.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FluxBC {
    pub left_flux: f64,
    pub right_flux: f64,
}

impl FluxBC {
    pub fn new(left_flux: f64, right_flux: f64) -> Self {
        FluxBC { left_flux, right_flux }
    }

    pub fn insulated() -> Self {
        FluxBC::default()
    }
}

/// Advances `state` by one explicit step of u_t = u_xx + source.
pub fn step_heat(
    state: &GridFunction,
    bc: FluxBC,
    dt: f64,
    source: Option<&GridFunction>,
) -> Result<GridFunction, FdmError> {
    if let Some(s) = source {
        if s.grid() != state.grid() {
            return Err(FdmError::GridMismatch);
        }
    }
    let mut next = vec![0.0; state.values().len()];
    step_heat_into(
        state.values(),
        &mut next,
        state.grid().dx(),
        bc,
        dt,
        source.map(|s| s.values()),
    )?;
    GridFunction::from_values(state.grid(), next).map_err(|e| match e {
        DomainError::NonFinite { index, .. } => FdmError::NonFiniteState { index },
        _ => unreachable!("length is preserved by construction"),
    })
}

/// Slice kernel behind [`step_heat`]; writes the new state into `next`.
pub fn step_heat_into(
    current: &[f64],
    next: &mut [f64],
    dx: f64,
    bc: FluxBC,
    dt: f64,
    source: Option<&[f64]>,
) -> Result<(), FdmError> {
    if !(bc.left_flux.is_finite() && bc.right_flux.is_finite()) {
        return Err(FdmError::NonFiniteFlux {
            left: bc.left_flux,
            right: bc.right_flux,
        });
    }
    let n = current.len();
    debug_assert_eq!(next.len(), n);
    let r = dt / (dx * dx);

    let ghost_left = current[1] - 2.0 * dx * bc.left_flux;
    next[0] = current[0] + r * (current[1] - 2.0 * current[0] + ghost_left);
    for i in 1..n - 1 {
        next[i] = current[i] + r * (current[i + 1] - 2.0 * current[i] + current[i - 1]);
    }
    let ghost_right = current[n - 2] + 2.0 * dx * bc.right_flux;
    next[n - 1] = current[n - 1] + r * (ghost_right - 2.0 * current[n - 1] + current[n - 2]);

    if let Some(s) = source {
        for (v, s) in next.iter_mut().zip(s) {
            *v += dt * s;
        }
    }
    match next.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(FdmError::NonFiniteState { index }),
        None => Ok(()),
    }
}

/// Composite trapezoid approximation of ∫₀¹ f dx.
pub fn quad(f: &GridFunction) -> f64 {
    quad_slice(f.values(), f.grid().dx())
}

pub fn quad_slice(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    let interior: f64 = values[1..n - 1].iter().sum();
    dx * (interior + 0.5 * (values[0] + values[n - 1]))
}

/// Trapezoid quadrature of a pointwise product.
pub fn inner_slice(a: &[f64], b: &[f64], dx: f64) -> f64 {
    let n = a.len();
    let interior: f64 = (1..n - 1).map(|i| a[i] * b[i]).sum();
    dx * (interior + 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]))
}

/// L²(0,1) norm, sqrt(quad(f²)).
pub fn l2_norm(f: &GridFunction) -> f64 {
    l2_norm_slice(f.values(), f.grid().dx())
}

pub fn l2_norm_slice(values: &[f64], dx: f64) -> f64 {
    inner_slice(values, values, dx).max(0.0).sqrt()
}

/// Discrete ∫₀¹ u_x² dx built from cell differences, Σ (u_{i+1} - u_i)² / dx.
///
/// This is exactly the quadratic form the stepper dissipates: with trapezoid
/// weights, Σ wᵢ uᵢ (Δ_h u)ᵢ = -gradient_energy(u) + boundary flux terms.
pub fn gradient_energy_slice(values: &[f64], dx: f64) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / dx
}

pub fn gradient_energy(f: &GridFunction) -> f64 {
    gradient_energy_slice(f.values(), f.grid().dx())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Grid;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(51).unwrap()
    }

    #[test]
    fn constant_state_is_steady() {
        let u = GridFunction::constant(grid(), 5.0).unwrap();
        let next = step_heat(&u, FluxBC::insulated(), 1e-4, None).unwrap();
        assert!(next.values().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn linear_profile_with_matching_fluxes_is_steady() {
        let u = GridFunction::from_fn(grid(), |x| x).unwrap();
        let next = step_heat(&u, FluxBC::new(1.0, 1.0), 1e-4, None).unwrap();
        assert!(next.max_abs_diff(&u) < 1e-14);
    }

    #[test]
    fn input_is_not_modified() {
        let u = GridFunction::from_fn(grid(), |x| x * x).unwrap();
        let copy = u.clone();
        let _ = step_heat(&u, FluxBC::new(0.3, -2.0), 1e-4, None).unwrap();
        assert_eq!(u, copy);
    }

    #[test]
    fn blow_up_is_reported() {
        let u = GridFunction::constant(grid(), 1e308).unwrap();
        let err = step_heat(&u, FluxBC::new(0.0, 1e308), 1e-4, None).unwrap_err();
        assert!(matches!(err, FdmError::NonFiniteState { .. }));
        assert!(matches!(
            step_heat(&u, FluxBC::new(f64::NAN, 0.0), 1e-4, None),
            Err(FdmError::NonFiniteFlux { .. })
        ));
    }

    #[test]
    fn source_on_other_grid_rejected() {
        let u = GridFunction::zeros(grid());
        let s = GridFunction::zeros(Grid::new(11).unwrap());
        assert_eq!(step_heat(&u, FluxBC::insulated(), 1e-4, Some(&s)), Err(FdmError::GridMismatch));
    }

    #[test]
    fn constant_source_raises_uniformly() {
        let u = GridFunction::zeros(grid());
        let s = GridFunction::constant(grid(), 2.0).unwrap();
        let next = step_heat(&u, FluxBC::insulated(), 1e-4, Some(&s)).unwrap();
        assert!(next.values().iter().all(|&v| (v - 2e-4).abs() < 1e-18));
    }

    fn eigenmode_error(n: usize, dt: f64, t_end: f64) -> f64 {
        let g = Grid::new(n).unwrap();
        let mut u = GridFunction::from_fn(g, |x| (PI * x).cos()).unwrap();
        let steps = (t_end / dt).round() as usize;
        for _ in 0..steps {
            u = step_heat(&u, FluxBC::insulated(), dt, None).unwrap();
        }
        let decay = (-PI * PI * t_end).exp();
        g.nodes()
            .zip(u.values())
            .map(|(x, v)| (v - decay * (PI * x).cos()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn neumann_eigenmode_converges() {
        // halving dx with dt = dx^2/4 reduces both error sources by 4
        let e1 = eigenmode_error(26, 0.04 * 0.04 / 4.0, 0.1);
        let e2 = eigenmode_error(51, 0.02 * 0.02 / 4.0, 0.1);
        assert!(e1 / e2 >= 3.5, "reduction {}", e1 / e2);
    }

    #[test]
    fn quadrature_oracles() {
        let g = grid();
        assert_eq!(quad(&GridFunction::zeros(g)), 0.0);
        let lin = GridFunction::from_fn(g, |x| x).unwrap();
        assert!((quad(&lin) - 0.5).abs() < 1e-15);
        let e = GridFunction::from_fn(g, |x| (2.0 * (1.0 - x)).exp()).unwrap();
        let exact = (2.0_f64.exp() - 1.0) / 2.0;
        assert!((exact - 3.194528).abs() < 1e-6);
        // trapezoid bound (dx²/12)·max|f''| with max|f''| = 4e²
        let bound = 0.02 * 0.02 / 12.0 * 4.0 * 2.0_f64.exp();
        assert!((quad(&e) - exact).abs() <= bound);
        // the discrete sum itself is geometric: e²·r^i with r = e^{-2dx}
        let r = (-0.04f64).exp();
        let e2 = 2.0_f64.exp();
        let sum = e2 * (1.0 - r.powi(51)) / (1.0 - r);
        let trapezoid = 0.02 * (sum - (e2 + 1.0) / 2.0);
        assert!((quad(&e) - trapezoid).abs() < 1e-12);
    }

    #[test]
    fn norm_oracles() {
        let g = grid();
        assert_eq!(l2_norm(&GridFunction::zeros(g)), 0.0);
        assert!((l2_norm(&GridFunction::constant(g, 3.0).unwrap()) - 3.0).abs() < 1e-14);
        let f = GridFunction::from_fn(g, |x| 2.0 * x - 1.0).unwrap();
        assert!((l2_norm(&f) - 1.0 / 3.0_f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn gradient_energy_of_linear_profile() {
        let f = GridFunction::from_fn(grid(), |x| 3.0 * x).unwrap();
        assert!((gradient_energy(&f) - 9.0).abs() < 1e-12);
    }
}
