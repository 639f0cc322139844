//! Core value types shared by every other module: plant/controller constants,
//! the uniform spatial grid, sampled fields, simulation configuration,
//! reference signals and the recorded trace.
//!
//! The true control coefficient `b` lives in [`Params`], but controllers and
//! observers only ever see an [`EstimatorParams`], which carries the sign of
//! `b` and nothing else about it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rejected construction or configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("time step {dt} violates the explicit stability bound dt <= dx^2/2 = {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("gain `{name}` must be positive and finite, got {value}")]
    NonPositiveGain { name: &'static str, value: f64 },
    #[error("control coefficient b must be nonzero and finite, got {0}")]
    ZeroCoefficient(f64),
    #[error("declared sign of b ({declared:?}) does not match b = {b}")]
    SignMismatch { declared: Sign, b: f64 },
    #[error("grid needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("spacing {0} does not divide [0, 1] into a whole number of cells")]
    IncommensurateSpacing(f64),
    #[error("field has {got} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("invalid `{name}`: {reason}")]
    InvalidConfig { name: &'static str, reason: String },
}

/// Sign of a nonzero real number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn of(value: f64) -> Option<Sign> {
        if value > 0.0 {
            Some(Sign::Positive)
        } else if value < 0.0 {
            Some(Sign::Negative)
        } else {
            None
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

fn positive_gain(name: &'static str, value: f64) -> Result<f64, DomainError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(DomainError::NonPositiveGain { name, value })
    }
}

/// Plant and controller constants.
///
/// This is the "plant view": it knows the true `b`. Hand
/// [`Params::estimator`] to anything that plays the role of the controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct Params {
    q: f64,
    b: f64,
    sign_b: Sign,
    c0: f64,
    c1: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    q: f64,
    b: f64,
    sign_b: Sign,
    c0: f64,
    c1: f64,
}

impl TryFrom<RawParams> for Params {
    type Error = DomainError;

    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        Params::with_sign(raw.q, raw.b, raw.sign_b, raw.c0, raw.c1)
    }
}

impl From<Params> for RawParams {
    fn from(p: Params) -> Self {
        RawParams {
            q: p.q,
            b: p.b,
            sign_b: p.sign_b,
            c0: p.c0,
            c1: p.c1,
        }
    }
}

impl Params {
    /// Builds parameters, taking the sign of `b` from `b` itself.
    pub fn new(q: f64, b: f64, c0: f64, c1: f64) -> Result<Self, DomainError> {
        let sign = Sign::of(b).ok_or(DomainError::ZeroCoefficient(b))?;
        Self::with_sign(q, b, sign, c0, c1)
    }

    /// Builds parameters with an explicitly declared sign of `b`, which must
    /// agree with `b`.
    pub fn with_sign(q: f64, b: f64, sign_b: Sign, c0: f64, c1: f64) -> Result<Self, DomainError> {
        let q = positive_gain("q", q)?;
        let c0 = positive_gain("c0", c0)?;
        let c1 = positive_gain("c1", c1)?;
        if !b.is_finite() {
            return Err(DomainError::ZeroCoefficient(b));
        }
        let actual = Sign::of(b).ok_or(DomainError::ZeroCoefficient(b))?;
        if actual != sign_b {
            return Err(DomainError::SignMismatch {
                declared: sign_b,
                b,
            });
        }
        Ok(Params { q, b, sign_b, c0, c1 })
    }

    /// Nominal plant and gains:
    /// q = 2, b = -10, c0 = c1 = 5.
    pub fn nominal() -> Self {
        Params::new(2.0, -10.0, 5.0, 5.0).expect("default parameters are valid")
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn sign_b(&self) -> Sign {
        self.sign_b
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// The controller-side view, with `b` redacted.
    pub fn estimator(&self) -> EstimatorParams {
        EstimatorParams {
            q: self.q,
            sign_b: self.sign_b,
            c0: self.c0,
            c1: self.c1,
        }
    }
}

/// What the controller, observer and update law are allowed to know.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorParams {
    pub q: f64,
    pub sign_b: Sign,
    pub c0: f64,
    pub c1: f64,
}

/// Uniform grid on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    dx: f64,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self, DomainError> {
        if n < 3 {
            return Err(DomainError::TooFewNodes(n));
        }
        Ok(Grid {
            n,
            dx: 1.0 / (n - 1) as f64,
        })
    }

    /// Grid whose spacing is `dx`; `1/dx` must be (close to) an integer.
    pub fn with_spacing(dx: f64) -> Result<Self, DomainError> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(DomainError::IncommensurateSpacing(dx));
        }
        let cells = (1.0 / dx).round();
        if cells < 2.0 || ((cells * dx) - 1.0).abs() > 1e-9 {
            return Err(DomainError::IncommensurateSpacing(dx));
        }
        Grid::new(cells as usize + 1)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Position of node `i`. The last node is exactly 1.
    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            1.0
        } else {
            i as f64 * self.dx
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }
}

/// A field sampled on every node of a [`Grid`]. Values are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Grid) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self, DomainError> {
        Self::from_values(grid, vec![value; grid.len()])
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self, DomainError> {
        Self::from_values(grid, grid.nodes().map(f).collect())
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, DomainError> {
        if values.len() != grid.len() {
            return Err(DomainError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(DomainError::NonFinite { index, value });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at x = 0.
    pub fn left(&self) -> f64 {
        self.values[0]
    }

    /// Value at x = 1.
    pub fn right(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `a * self + b * other`, rejected if the grids differ or the result
    /// overflows.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction, DomainError> {
        if self.grid != other.grid {
            return Err(DomainError::LengthMismatch {
                expected: self.grid.len(),
                got: other.grid.len(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        GridFunction::from_values(self.grid, values)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction, DomainError> {
        self.combine(1.0, other, -1.0)
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

/// Discretization, horizon and analysis settings for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    pub grid: Grid,
    /// Highest derivative order kept in the servo series.
    pub servo_truncation: usize,
    /// Window length for the persistent-excitation check.
    pub pe_window: f64,
    pub pe_threshold: f64,
    /// Steps between trace samples.
    pub sample_stride: usize,
    /// Steps between field snapshots; 0 disables snapshots.
    pub snapshot_stride: usize,
}

impl Default for SimConfig {
    /// dx = 0.02, dt = 1e-4, samples every 100 steps.
    fn default() -> Self {
        SimConfig {
            dt: 1e-4,
            t_final: 5.0,
            grid: Grid::new(51).expect("51 nodes"),
            servo_truncation: 12,
            pe_window: 1.0,
            pe_threshold: 1e-3,
            sample_stride: 100,
            snapshot_stride: 0,
        }
    }
}

impl SimConfig {
    pub fn with_horizon(mut self, t_final: f64) -> Self {
        self.t_final = t_final;
        self
    }

    pub fn with_resolution(mut self, dx: f64, dt: f64) -> Result<Self, DomainError> {
        self.grid = Grid::with_spacing(dx)?;
        self.dt = dt;
        Ok(self)
    }

    /// Largest stable explicit time step, dx²/2.
    pub fn cfl_limit(&self) -> f64 {
        0.5 * self.grid.dx() * self.grid.dx()
    }

    /// Number of time steps needed to reach `t_final`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Checks every invariant of `p` and `c`, reporting the first violation.
pub fn validate_config(p: &Params, c: &SimConfig) -> Result<(), DomainError> {
    // Params may have been built field by field through serde; recheck.
    Params::with_sign(p.q, p.b, p.sign_b, p.c0, p.c1)?;
    if c.grid.len() < 3 {
        return Err(DomainError::TooFewNodes(c.grid.len()));
    }
    if !(c.dt.is_finite() && c.dt > 0.0) {
        return Err(DomainError::InvalidConfig {
            name: "dt",
            reason: format!("must be positive, got {}", c.dt),
        });
    }
    if c.dt > c.cfl_limit() {
        return Err(DomainError::CflViolation {
            dt: c.dt,
            limit: c.cfl_limit(),
        });
    }
    if !(c.t_final.is_finite() && c.t_final >= c.dt) {
        return Err(DomainError::InvalidConfig {
            name: "t_final",
            reason: format!("must be at least dt = {}, got {}", c.dt, c.t_final),
        });
    }
    if !(c.pe_window.is_finite() && c.pe_window > 0.0) {
        return Err(DomainError::InvalidConfig {
            name: "pe_window",
            reason: format!("must be positive, got {}", c.pe_window),
        });
    }
    if !(c.pe_threshold.is_finite() && c.pe_threshold > 0.0) {
        return Err(DomainError::InvalidConfig {
            name: "pe_threshold",
            reason: format!("must be positive, got {}", c.pe_threshold),
        });
    }
    if c.sample_stride == 0 {
        return Err(DomainError::InvalidConfig {
            name: "sample_stride",
            reason: "must be at least 1".into(),
        });
    }
    Ok(())
}

/// A reference trajectory r(t) together with its time derivatives.
///
/// Implement this for custom references; the servo series only needs
/// pointwise derivatives and a uniform bound per derivative order.
pub trait Reference {
    /// r^(j)(t).
    fn derivative(&self, j: usize, t: f64) -> f64;

    /// sup over t >= 0 of |r^(j)(t)|.
    fn derivative_bound(&self, j: usize) -> f64;

    /// Whether sup over t and all j of |r^(j)| is finite.
    fn has_uniform_derivative_bound(&self) -> bool;

    /// Derivatives of order >= 1 vanish identically.
    fn is_constant(&self) -> bool {
        false
    }

    fn value(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }
}

/// The built-in references.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSignal {
    Zero,
    Constant { value: f64 },
    /// A·sin(ω t)
    Sinusoid { amplitude: f64, frequency: f64 },
}

impl ReferenceSignal {
    pub fn constant(value: f64) -> Result<Self, DomainError> {
        if !value.is_finite() {
            return Err(DomainError::InvalidConfig {
                name: "ref",
                reason: format!("constant must be finite, got {value}"),
            });
        }
        Ok(ReferenceSignal::Constant { value })
    }

    pub fn sinusoid(amplitude: f64, frequency: f64) -> Result<Self, DomainError> {
        if !(amplitude.is_finite() && frequency.is_finite() && frequency >= 0.0) {
            return Err(DomainError::InvalidConfig {
                name: "ref",
                reason: format!("sinusoid needs finite amplitude and frequency >= 0, got A={amplitude}, w={frequency}"),
            });
        }
        Ok(ReferenceSignal::Sinusoid { amplitude, frequency })
    }
}

impl Reference for ReferenceSignal {
    fn derivative(&self, j: usize, t: f64) -> f64 {
        match *self {
            ReferenceSignal::Zero => 0.0,
            ReferenceSignal::Constant { value } => {
                if j == 0 {
                    value
                } else {
                    0.0
                }
            }
            ReferenceSignal::Sinusoid { amplitude, frequency } => {
                // d^j/dt^j sin(wt) = w^j sin(wt + j pi/2)
                let phase = frequency * t;
                let base = match j % 4 {
                    0 => phase.sin(),
                    1 => phase.cos(),
                    2 => -phase.sin(),
                    _ => -phase.cos(),
                };
                amplitude * frequency.powi(j as i32) * base
            }
        }
    }

    fn derivative_bound(&self, j: usize) -> f64 {
        match *self {
            ReferenceSignal::Zero => 0.0,
            ReferenceSignal::Constant { value } => {
                if j == 0 {
                    value.abs()
                } else {
                    0.0
                }
            }
            ReferenceSignal::Sinusoid { amplitude, frequency } => amplitude.abs() * frequency.powi(j as i32),
        }
    }

    fn has_uniform_derivative_bound(&self) -> bool {
        match *self {
            ReferenceSignal::Sinusoid { frequency, amplitude } => frequency <= 1.0 || amplitude == 0.0,
            _ => true,
        }
    }

    fn is_constant(&self) -> bool {
        !matches!(self, ReferenceSignal::Sinusoid { amplitude, frequency } if *amplitude != 0.0 && *frequency != 0.0)
    }
}

/// One recorded sample. Columns that do not apply to a scenario are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceSample {
    pub t: f64,
    pub u0: f64,
    pub u: f64,
    /// ζ for closed loops, ζ̃ = 1/b - ζ for error-system runs.
    pub zeta: f64,
    pub w0: f64,
    pub w1: f64,
    pub wnorm: f64,
    pub obs_err_norm: Option<f64>,
    pub energy_e: Option<f64>,
    pub energy_f: Option<f64>,
    pub energy_v: Option<f64>,
    /// Running integral of the dissipation ∫(‖w̃ₓ‖² + c1 w̃(1)²) dt.
    pub dissipated: Option<f64>,
    /// r(t), tracking runs only.
    pub reference: Option<f64>,
    /// v_x(1,t), tracking runs only.
    pub servo_flux: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub w: GridFunction,
    /// Observer field (ŵ or ẑ); absent for runs without an observer.
    pub what: Option<GridFunction>,
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    /// ‖w‖ exceeded the blow-up threshold at time `t`.
    BlowUp { t: f64, norm: f64 },
}

/// Every field at the last simulated instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalState {
    pub t: f64,
    pub w: GridFunction,
    /// ŵ or ẑ; absent for runs without an observer.
    pub what: Option<GridFunction>,
    pub zeta: f64,
    pub u0: f64,
    pub u: f64,
}

/// Time-indexed record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub samples: Vec<TraceSample>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: FinalState,
    pub outcome: Outcome,
}

impl Trace {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn column(&self, f: impl Fn(&TraceSample) -> f64) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }

    pub fn last(&self) -> &TraceSample {
        self.samples.last().expect("a trace always holds the initial sample")
    }

    /// Sample whose time is closest to `t`.
    pub fn at(&self, t: f64) -> &TraceSample {
        self.samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("a trace always holds the initial sample")
    }

    pub fn blew_up(&self) -> bool {
        matches!(self.outcome, Outcome::BlowUp { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_setup_validates() {
        let p = Params::new(2.0, -10.0, 5.0, 5.0).unwrap();
        let c = SimConfig::default();
        assert_eq!(c.grid.dx(), 0.02);
        assert!(validate_config(&p, &c).is_ok());
    }

    #[test]
    fn cfl_violation_is_reported() {
        let p = Params::nominal();
        let c = SimConfig::default().with_resolution(0.02, 3e-4).unwrap();
        match validate_config(&p, &c) {
            Err(DomainError::CflViolation { dt, limit }) => {
                assert_eq!(dt, 3e-4);
                assert!((limit - 2e-4).abs() < 1e-15);
            }
            other => panic!("expected CflViolation, got {other:?}"),
        }
    }

    #[test]
    fn sign_mismatch_rejected() {
        let err = Params::with_sign(2.0, -10.0, Sign::Positive, 5.0, 5.0).unwrap_err();
        assert!(matches!(err, DomainError::SignMismatch { .. }));
    }

    #[test]
    fn bad_gains_and_zero_b_rejected() {
        assert!(matches!(
            Params::new(0.0, 1.0, 1.0, 1.0),
            Err(DomainError::NonPositiveGain { name: "q", .. })
        ));
        assert!(matches!(
            Params::new(1.0, 1.0, -1.0, 1.0),
            Err(DomainError::NonPositiveGain { name: "c0", .. })
        ));
        assert!(matches!(
            Params::new(1.0, 1.0, 1.0, f64::NAN),
            Err(DomainError::NonPositiveGain { name: "c1", .. })
        ));
        assert!(matches!(Params::new(1.0, 0.0, 1.0, 1.0), Err(DomainError::ZeroCoefficient(_))));
    }

    #[test]
    fn params_deserialization_is_validated() {
        let bad = r#"{"q":2.0,"b":-10.0,"sign_b":"Positive","c0":5.0,"c1":5.0}"#;
        assert!(serde_json::from_str::<Params>(bad).is_err());
        let good = serde_json::to_string(&Params::nominal()).unwrap();
        assert_eq!(serde_json::from_str::<Params>(&good).unwrap(), Params::nominal());
    }

    #[test]
    fn grid_nodes_hit_endpoints() {
        for n in [3, 7, 51, 101, 1001] {
            let g = Grid::new(n).unwrap();
            assert_eq!(g.node(0), 0.0);
            assert_eq!(g.node(n - 1), 1.0);
            for i in 0..n {
                let exact = i as f64 / (n - 1) as f64;
                let diff = (g.node(i) - exact).abs();
                assert!(diff <= 2.0 * f64::EPSILON * exact.max(f64::MIN_POSITIVE), "n={n} i={i} diff={diff}");
            }
        }
        assert!(Grid::new(2).is_err());
        assert!(Grid::with_spacing(0.3).is_err());
        assert_eq!(Grid::with_spacing(0.005).unwrap().len(), 201);
    }

    #[test]
    fn grid_function_rejects_nan_and_bad_length() {
        let g = Grid::new(5).unwrap();
        assert!(GridFunction::from_values(g, vec![0.0; 4]).is_err());
        assert!(matches!(
            GridFunction::from_values(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]),
            Err(DomainError::NonFinite { index: 2, .. })
        ));
        let big = GridFunction::constant(g, f64::MAX).unwrap();
        assert!(big.combine(1.0, &big, 1.0).is_err());
    }

    #[test]
    fn constant_reference_derivatives() {
        let r = ReferenceSignal::constant(3.0).unwrap();
        assert_eq!(r.derivative(0, 7.3), 3.0);
        for j in 1..10 {
            assert_eq!(r.derivative(j, 1.1), 0.0);
        }
        assert!(r.is_constant());
        assert!(r.has_uniform_derivative_bound());
    }

    #[test]
    fn sinusoid_derivatives_cycle() {
        let r = ReferenceSignal::sinusoid(2.0, 3.0).unwrap();
        let t = 0.4_f64;
        assert!((r.derivative(1, t) - 6.0 * (3.0 * t).cos()).abs() < 1e-12);
        assert!((r.derivative(2, t) + 18.0 * (3.0 * t).sin()).abs() < 1e-12);
        assert!((r.derivative(4, t) - 162.0 * (3.0 * t).sin()).abs() < 1e-10);
        assert!(!r.has_uniform_derivative_bound());
        assert!(ReferenceSignal::sinusoid(1.0, 1.0).unwrap().has_uniform_derivative_bound());
    }
}
