//! Control laws and the servo reference machinery.
//!
//! The adaptive controller is factored as u = ζ·u₀: u₀ is computed from the
//! observer field alone and ζ estimates 1/b. Neither [`adaptive_u0`] nor
//! [`zeta_step`] can see `b`; they take an [`EstimatorParams`].

use thiserror::Error;

use crate::domain::{EstimatorParams, GridFunction, Params, Reference, Sign};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("servo series truncated at J = {truncation}: first omitted term {tail:e} exceeds tolerance {tolerance:e}")]
    TruncationInsufficient { truncation: usize, tail: f64, tolerance: f64 },
    #[error("servo position {0} outside [0, 1]")]
    PositionOutOfRange(f64),
}

/// Default ceiling on the first omitted servo term.
pub const DEFAULT_SERVO_TOLERANCE: f64 = 1e-10;

/// w(1) + q ∫₀¹ e^{q(1-x)} w(x) dx, the backstepping functional shared by
/// all stabilizing laws.
pub fn backstepping_functional(w: &GridFunction, q: f64) -> f64 {
    let dx = w.grid().dx();
    let values = w.values();
    let n = values.len();
    let weight = |i: usize| {
        let x = w.grid().node(i);
        (q * (1.0 - x)).exp() * values[i]
    };
    let interior: f64 = (1..n - 1).map(weight).sum();
    let integral = dx * (interior + 0.5 * (weight(0) + weight(n - 1)));
    w.right() + q * integral
}

/// Full-state backstepping feedback when `b` is known:
/// u = -((q + c0)/b)·[w(1) + q ∫ e^{q(1-x)} w dx].
pub fn backstepping_known_b(w: &GridFunction, p: &Params) -> f64 {
    -((p.q() + p.c0()) / p.b()) * backstepping_functional(w, p.q())
}

/// Observer-based u₀ = -(q + c0)·[ŵ(1) + q ∫ e^{q(1-x)} ŵ dx] (+ v_x(1,t)
/// when tracking).
pub fn adaptive_u0(what: &GridFunction, p: &EstimatorParams, servo: Option<&ServoTerms>) -> f64 {
    let feedback = -(p.q + p.c0) * backstepping_functional(what, p.q);
    match servo {
        Some(s) => feedback + s.vx1,
        None => feedback,
    }
}

/// One explicit step of ζ̇ = -sgn(b)·innovation·u₀.
pub fn zeta_step(zeta: f64, sign_b: Sign, innovation: f64, u0: f64, dt: f64) -> f64 {
    zeta - sign_b.as_f64() * innovation * u0 * dt
}

/// Boundary values of the servo field v at x = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoTerms {
    /// v(1, t)
    pub v1: f64,
    /// v_x(1, t)
    pub vx1: f64,
    pub truncation: usize,
    /// Largest magnitude of the first omitted term of the two series.
    pub tail_bound: f64,
}

impl ServoTerms {
    pub fn zero() -> Self {
        ServoTerms {
            v1: 0.0,
            vx1: 0.0,
            truncation: 0,
            tail_bound: 0.0,
        }
    }
}

/// Truncated evaluation of
/// v(x,t) = Σ_j r^(j)(t)·[x^{2j}/(2j)! - q·x^{2j+1}/(2j+1)!].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoSeries {
    pub q: f64,
    pub truncation: usize,
    pub tolerance: f64,
}

impl ServoSeries {
    pub fn new(q: f64, truncation: usize) -> Self {
        ServoSeries {
            q,
            truncation,
            tolerance: DEFAULT_SERVO_TOLERANCE,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// Truncation for a reference: 0 when its derivatives vanish.
    pub fn for_reference(q: f64, reference: &dyn Reference, truncation: usize) -> Self {
        let j = if reference.is_constant() { 0 } else { truncation };
        ServoSeries::new(q, j)
    }

    /// x^{2j}/(2j)! - q·x^{2j+1}/(2j+1)!
    fn bracket(&self, j: usize, x: f64) -> f64 {
        let even = x.powi(2 * j as i32) / factorial(2 * j);
        let odd = self.q * x.powi(2 * j as i32 + 1) / factorial(2 * j + 1);
        even - odd
    }

    fn check_tail(&self, tail: f64) -> Result<(), ControlError> {
        if tail > self.tolerance {
            Err(ControlError::TruncationInsufficient {
                truncation: self.truncation,
                tail,
                tolerance: self.tolerance,
            })
        } else {
            Ok(())
        }
    }

    /// v(x, t).
    pub fn eval(&self, reference: &dyn Reference, x: f64, t: f64) -> Result<f64, ControlError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(ControlError::PositionOutOfRange(x));
        }
        let next = self.truncation + 1;
        self.check_tail(reference.derivative_bound(next) * self.bracket(next, x).abs())?;
        Ok((0..=self.truncation)
            .map(|j| reference.derivative(j, t) * self.bracket(j, x))
            .sum())
    }

    /// v(1, t) and v_x(1, t).
    pub fn boundary(&self, reference: &dyn Reference, t: f64) -> Result<ServoTerms, ControlError> {
        let q = self.q;
        let v1_coeff = |j: usize| 1.0 / factorial(2 * j) - q / factorial(2 * j + 1);
        // v_x(1,t) = -q r - Σ_{j>=1} r^(j) [q/(2j)! - 1/(2j-1)!]
        let vx1_coeff = |j: usize| {
            if j == 0 {
                -q
            } else {
                -(q / factorial(2 * j) - 1.0 / factorial(2 * j - 1))
            }
        };
        let mut v1 = 0.0;
        let mut vx1 = 0.0;
        for j in 0..=self.truncation {
            let r = reference.derivative(j, t);
            v1 += r * v1_coeff(j);
            vx1 += r * vx1_coeff(j);
        }
        let next = self.truncation + 1;
        let bound = reference.derivative_bound(next);
        let tail_bound = (bound * v1_coeff(next).abs()).max(bound * vx1_coeff(next).abs());
        self.check_tail(tail_bound)?;
        Ok(ServoTerms {
            v1,
            vx1,
            truncation: self.truncation,
            tail_bound,
        })
    }

    /// v(·, t) sampled on the nodes of `like`'s grid.
    pub fn field(&self, reference: &dyn Reference, like: &GridFunction, t: f64) -> Result<GridFunction, ControlError> {
        let values = like
            .grid()
            .nodes()
            .map(|x| self.eval(reference, x, t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GridFunction::from_values(like.grid(), values).expect("servo values are finite"))
    }
}

/// v(x, t) truncated at order `truncation`.
pub fn servo_eval(reference: &dyn Reference, q: f64, x: f64, t: f64, truncation: usize) -> Result<f64, ControlError> {
    ServoSeries::new(q, truncation).eval(reference, x, t)
}

/// (v(1,t), v_x(1,t)) truncated at order `truncation`.
pub fn servo_boundary(reference: &dyn Reference, q: f64, t: f64, truncation: usize) -> Result<ServoTerms, ControlError> {
    ServoSeries::new(q, truncation).boundary(reference, t)
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Grid, ReferenceSignal};

    fn grid() -> Grid {
        Grid::new(51).unwrap()
    }

    #[test]
    fn known_b_feedback() {
        let p = Params::nominal();
        assert_eq!(backstepping_known_b(&GridFunction::zeros(grid()), &p), 0.0);
        let ones = GridFunction::constant(grid(), 1.0).unwrap();
        let u = backstepping_known_b(&ones, &p);
        // 0.7 (1 + 2 (e^2 - 1)/2) = 0.7 e^2
        // trapezoid error of the integral is at most 9.9e-4, scaled by 0.7·q
        assert!((u - 0.7 * 2.0_f64.exp()).abs() < 1.4e-3, "{u}");
        let twos = GridFunction::constant(grid(), 2.0).unwrap();
        assert_eq!(backstepping_known_b(&twos, &p), 2.0 * u);
    }

    #[test]
    fn adaptive_feedback() {
        let est = Params::nominal().estimator();
        assert_eq!(adaptive_u0(&GridFunction::zeros(grid()), &est, None), 0.0);
        let ones = GridFunction::constant(grid(), 1.0).unwrap();
        let u0 = adaptive_u0(&ones, &est, None);
        assert!((u0 + 7.0 * 2.0_f64.exp()).abs() < 1.4e-2, "{u0}");
        let servo = servo_boundary(&ReferenceSignal::constant(3.0).unwrap(), 2.0, 0.0, 0).unwrap();
        assert_eq!(adaptive_u0(&GridFunction::zeros(grid()), &est, Some(&servo)), -6.0);
    }

    #[test]
    fn adaptive_u0_agrees_with_known_b_law_scaled_by_b() {
        let p = Params::nominal();
        let w = GridFunction::from_fn(grid(), |x| (3.0 * x).sin() - 0.2).unwrap();
        let u0 = adaptive_u0(&w, &p.estimator(), None);
        let u = backstepping_known_b(&w, &p);
        assert!((u0 / p.b() - u).abs() < 1e-12);
    }

    #[test]
    fn zeta_update() {
        assert_eq!(zeta_step(0.37, Sign::Negative, 0.0, 5.0, 1e-4), 0.37);
        assert_eq!(zeta_step(0.37, Sign::Positive, 2.0, 0.0, 1e-4), 0.37);
        let z = zeta_step(0.0, Sign::Negative, 0.5, 2.0, 0.1);
        assert!((z - 0.1).abs() < 1e-15);
    }

    #[test]
    fn servo_at_origin_is_reference() {
        let r = ReferenceSignal::sinusoid(1.5, 0.8).unwrap();
        for &t in &[0.0, 0.3, 2.7] {
            assert_eq!(servo_eval(&r, 2.0, 0.0, t, 12).unwrap(), r.value(t));
        }
    }

    #[test]
    fn servo_constant_reference() {
        let r = ReferenceSignal::constant(3.0).unwrap();
        for j in [0, 1, 5, 12] {
            assert_eq!(servo_eval(&r, 2.0, 1.0, 0.4, j).unwrap(), -3.0);
            let s = servo_boundary(&r, 2.0, 0.4, j).unwrap();
            assert_eq!((s.v1, s.vx1, s.tail_bound), (-3.0, -6.0, 0.0));
        }
        let z = servo_boundary(&ReferenceSignal::Zero, 2.0, 1.0, 4).unwrap();
        assert_eq!((z.v1, z.vx1), (0.0, 0.0));
    }

    #[test]
    fn sinusoid_servo_self_converges() {
        let r = ReferenceSignal::sinusoid(1.0, 1.0).unwrap();
        let lo = servo_eval(&r, 2.0, 1.0, 1.0, 12).unwrap();
        let hi = servo_eval(&r, 2.0, 1.0, 1.0, 20).unwrap();
        assert!((lo - hi).abs() <= 1e-8);
        let lo = servo_boundary(&r, 2.0, 1.0, 12).unwrap();
        let hi = servo_boundary(&r, 2.0, 1.0, 20).unwrap();
        assert!((lo.vx1 - hi.vx1).abs() <= 1e-8);
        assert!(lo.tail_bound > 0.0 && lo.tail_bound < 1e-20);
    }

    #[test]
    fn short_truncation_is_rejected() {
        let r = ReferenceSignal::sinusoid(1.0, 1.0).unwrap();
        assert!(matches!(
            servo_boundary(&r, 2.0, 0.0, 1),
            Err(ControlError::TruncationInsufficient { truncation: 1, .. })
        ));
        assert!(servo_eval(&r, 2.0, 1.5, 0.0, 12).is_err());
    }

    #[test]
    fn boundary_series_match_pointwise_series() {
        let r = ReferenceSignal::sinusoid(0.7, 0.9).unwrap();
        let s = servo_boundary(&r, 2.0, 1.3, 14).unwrap();
        let v1 = servo_eval(&r, 2.0, 1.0, 1.3, 14).unwrap();
        assert!((s.v1 - v1).abs() < 1e-14);
        let h = 1e-5;
        let left = servo_eval(&r, 2.0, 1.0 - h, 1.3, 14).unwrap();
        let left2 = servo_eval(&r, 2.0, 1.0 - 2.0 * h, 1.3, 14).unwrap();
        let fd = (3.0 * v1 - 4.0 * left + left2) / (2.0 * h);
        assert!((s.vx1 - fd).abs() < 1e-6, "{} vs {}", s.vx1, fd);
    }
}
