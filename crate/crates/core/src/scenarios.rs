//! Closed loops and reference runs producing [`Trace`]s.
//!
//! Every coupled run advances in the same order: read boundary values and
//! compute u₀ from the start-of-step observer field, step the plant with
//! u = ζ·u₀, step the observer, then update ζ with the end-of-step
//! innovation. Updating ζ last keeps the discrete Lyapunov functional
//! non-increasing under the CFL bound; the start-of-step variant overshoots
//! by O(dt²(bζ̃u₀)²/dx) on steps with a large flux mismatch.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::energies;
use crate::control::{adaptive_u0, zeta_step, ControlError, ServoSeries, ServoTerms};
use crate::domain::{
    validate_config, DomainError, FinalState, GridFunction, Outcome, Params, Reference, ReferenceSignal, SimConfig,
    Snapshot, Trace, TraceSample,
};
use crate::fdm::{self, step_heat_into, FdmError, FluxBC};

/// ‖w‖ above which a run is declared blown up and stopped.
pub const BLOW_UP_NORM: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] DomainError),
    #[error(transparent)]
    Fdm(#[from] FdmError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("initial field `{0}` is not sampled on the configured grid")]
    GridMismatch(&'static str),
}

/// An externally prescribed u₀(t).
pub trait Signal {
    fn at(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Signal for F {
    fn at(&self, t: f64) -> f64 {
        self(t)
    }
}

/// Built-in open-loop u₀ signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum U0Signal {
    Zero,
    Constant { value: f64 },
    /// e^{-t}
    ExpDecay,
    /// A·sin(ω t)
    Sine { amplitude: f64, frequency: f64 },
}

impl Signal for U0Signal {
    fn at(&self, t: f64) -> f64 {
        match *self {
            U0Signal::Zero => 0.0,
            U0Signal::Constant { value } => value,
            U0Signal::ExpDecay => (-t).exp(),
            U0Signal::Sine { amplitude, frequency } => amplitude * (frequency * t).sin(),
        }
    }
}

fn check_grid(f: &GridFunction, config: &SimConfig, name: &'static str) -> Result<(), ScenarioError> {
    if f.grid() != config.grid {
        Err(ScenarioError::GridMismatch(name))
    } else {
        Ok(())
    }
}

fn grid_function(config: &SimConfig, values: &[f64]) -> GridFunction {
    GridFunction::from_values(config.grid, values.to_vec()).expect("stepper keeps fields finite")
}

/// Sampling and snapshot bookkeeping shared by every run.
struct Recorder {
    sample_stride: usize,
    snapshot_stride: usize,
    steps: usize,
    samples: Vec<TraceSample>,
    snapshots: Vec<Snapshot>,
}

impl Recorder {
    fn new(config: &SimConfig) -> Self {
        let steps = config.steps();
        Recorder {
            sample_stride: config.sample_stride,
            snapshot_stride: config.snapshot_stride,
            steps,
            samples: Vec::with_capacity(steps / config.sample_stride + 2),
            snapshots: Vec::new(),
        }
    }

    fn wants_sample(&self, k: usize) -> bool {
        k.is_multiple_of(self.sample_stride) || k == self.steps
    }

    fn wants_snapshot(&self, k: usize) -> bool {
        self.snapshot_stride > 0 && (k.is_multiple_of(self.snapshot_stride) || k == self.steps)
    }
}

/// Plant under zero input: w_x(0) = -q w(0), w_x(1) = 0.
pub fn run_open_loop(p: &Params, config: &SimConfig, w0: &GridFunction) -> Result<Trace, ScenarioError> {
    validate_config(p, config)?;
    check_grid(w0, config, "w0")?;
    let dx = config.grid.dx();
    let mut rec = Recorder::new(config);
    let mut w = w0.values().to_vec();
    let mut next = vec![0.0; w.len()];
    let mut outcome = Outcome::Completed;
    let mut t = 0.0;

    for k in 0..=rec.steps {
        t = k as f64 * config.dt;
        let wnorm = fdm::l2_norm_slice(&w, dx);
        let blown = wnorm > BLOW_UP_NORM;
        if rec.wants_sample(k) || blown {
            rec.samples.push(TraceSample {
                t,
                w0: w[0],
                w1: w[w.len() - 1],
                wnorm,
                ..TraceSample::default()
            });
        }
        if rec.wants_snapshot(k) {
            rec.snapshots.push(Snapshot {
                t,
                w: grid_function(config, &w),
                what: None,
            });
        }
        if blown {
            outcome = Outcome::BlowUp { t, norm: wnorm };
            break;
        }
        if k == rec.steps {
            break;
        }
        let bc = FluxBC::new(-p.q() * w[0], 0.0);
        step_heat_into(&w, &mut next, dx, bc, config.dt, None)?;
        std::mem::swap(&mut w, &mut next);
    }

    Ok(Trace {
        samples: rec.samples,
        snapshots: rec.snapshots,
        final_state: FinalState {
            t,
            w: grid_function(config, &w),
            what: None,
            zeta: 0.0,
            u0: 0.0,
            u: 0.0,
        },
        outcome,
    })
}

enum U0Source<'a> {
    External(&'a dyn Signal),
    Feedback,
}

/// Plant + observer + update law with either an external or a feedback u₀,
/// and an optional servo reference (tracking).
fn run_coupled(
    p: &Params,
    config: &SimConfig,
    w0: &GridFunction,
    what0: &GridFunction,
    zeta0: f64,
    reference: Option<&dyn Reference>,
    source: U0Source<'_>,
) -> Result<Trace, ScenarioError> {
    validate_config(p, config)?;
    check_grid(w0, config, "w0")?;
    check_grid(what0, config, "what0")?;
    if !zeta0.is_finite() {
        return Err(DomainError::InvalidConfig {
            name: "zeta0",
            reason: format!("must be finite, got {zeta0}"),
        }
        .into());
    }

    let est = p.estimator();
    let dx = config.grid.dx();
    let n = config.grid.len();
    let series = reference.map(|r| ServoSeries::for_reference(p.q(), r, config.servo_truncation));
    let servo_at = |t: f64| -> Result<ServoTerms, ScenarioError> {
        match (reference, series) {
            (Some(r), Some(s)) => Ok(s.boundary(r, t)?),
            _ => Ok(ServoTerms::zero()),
        }
    };
    // Servo field v(·,t); None when there is no reference.
    let servo_field = |t: f64| -> Result<Option<Vec<f64>>, ScenarioError> {
        match (reference, series) {
            (Some(r), Some(s)) => Ok(Some(s.field(r, w0, t)?.into_values())),
            _ => Ok(None),
        }
    };

    let mut rec = Recorder::new(config);
    let mut w = w0.values().to_vec();
    let mut what = what0.values().to_vec();
    let mut w_next = vec![0.0; n];
    let mut what_next = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut zeta = zeta0;
    let mut servo = servo_at(0.0)?;
    let mut dissipated = 0.0;
    let mut outcome = Outcome::Completed;
    let mut t = 0.0;
    let mut last_u0 = 0.0;
    let mut last_u = 0.0;

    for k in 0..=rec.steps {
        t = k as f64 * config.dt;
        let what_fn = grid_function(config, &what);
        let u0 = match source {
            U0Source::External(signal) => signal.at(t),
            U0Source::Feedback => adaptive_u0(&what_fn, &est, reference.map(|_| &servo)),
        };
        let u = zeta * u0;
        last_u0 = u0;
        last_u = u;
        let innovation = w[n - 1] - servo.v1 - what[n - 1];

        // Observation error w - v - what (w - what without a reference).
        let v = servo_field(t)?;
        for i in 0..n {
            err[i] = w[i] - what[i] - v.as_ref().map_or(0.0, |v| v[i]);
        }
        let wnorm = fdm::l2_norm_slice(&w, dx);
        let blown = wnorm > BLOW_UP_NORM;

        if rec.wants_sample(k) || blown {
            let zeta_err = 1.0 / p.b() - zeta;
            let err_fn = grid_function(config, &err);
            let (e, f, v_energy) = energies(&err_fn, zeta_err, p.b());
            rec.samples.push(TraceSample {
                t,
                u0,
                u,
                zeta,
                w0: w[0],
                w1: w[n - 1],
                wnorm,
                obs_err_norm: Some(fdm::l2_norm_slice(&err, dx)),
                energy_e: Some(e),
                energy_f: Some(f),
                energy_v: Some(v_energy),
                dissipated: Some(dissipated),
                reference: reference.map(|r| r.value(t)),
                servo_flux: reference.map(|_| servo.vx1),
            });
        }
        if rec.wants_snapshot(k) {
            rec.snapshots.push(Snapshot {
                t,
                w: grid_function(config, &w),
                what: Some(what_fn),
            });
        }
        if blown {
            outcome = Outcome::BlowUp { t, norm: wnorm };
            break;
        }
        if k == rec.steps {
            break;
        }

        dissipated +=
            config.dt * (fdm::gradient_energy_slice(&err, dx) + p.c1() * err[n - 1] * err[n - 1]);

        let r_now = reference.map_or(0.0, |r| r.value(t));
        let plant_bc = FluxBC::new(-p.q() * w[0], p.b() * u);
        let observer_bc = FluxBC::new(-est.q * (w[0] - r_now), u0 + est.c1 * innovation - servo.vx1);
        step_heat_into(&w, &mut w_next, dx, plant_bc, config.dt, None)?;
        step_heat_into(&what, &mut what_next, dx, observer_bc, config.dt, None)?;
        std::mem::swap(&mut w, &mut w_next);
        std::mem::swap(&mut what, &mut what_next);

        let t_next = (k + 1) as f64 * config.dt;
        servo = servo_at(t_next)?;
        let innovation_next = w[n - 1] - servo.v1 - what[n - 1];
        zeta = zeta_step(zeta, est.sign_b, innovation_next, u0, config.dt);
        if !zeta.is_finite() {
            return Err(FdmError::NonFiniteState { index: n }.into());
        }
    }

    Ok(Trace {
        samples: rec.samples,
        snapshots: rec.snapshots,
        final_state: FinalState {
            t,
            w: grid_function(config, &w),
            what: Some(grid_function(config, &what)),
            zeta,
            u0: last_u0,
            u: last_u,
        },
        outcome,
    })
}

/// Plant driven by u = ζ·u₀ for a prescribed u₀(t), together with the
/// observer and the ζ update law.
pub fn run_observer(
    p: &Params,
    config: &SimConfig,
    w0: &GridFunction,
    what0: &GridFunction,
    zeta0: f64,
    u0: &dyn Signal,
) -> Result<Trace, ScenarioError> {
    run_coupled(p, config, w0, what0, zeta0, None, U0Source::External(u0))
}

/// Output-feedback stabilization: u₀ from the observer field, u = ζ·u₀.
pub fn run_stabilization(
    p: &Params,
    config: &SimConfig,
    w0: &GridFunction,
    what0: &GridFunction,
    zeta0: f64,
) -> Result<Trace, ScenarioError> {
    run_coupled(p, config, w0, what0, zeta0, None, U0Source::Feedback)
}

/// Output tracking of w(0,t) → r(t) through the servo field v.
///
/// The observer state is ẑ; samples carry r(t) and v_x(1,t).
pub fn run_tracking(
    p: &Params,
    config: &SimConfig,
    w0: &GridFunction,
    zhat0: &GridFunction,
    zeta0: f64,
    reference: &dyn Reference,
) -> Result<Trace, ScenarioError> {
    run_coupled(p, config, w0, zhat0, zeta0, Some(reference), U0Source::Feedback)
}

/// Same as [`run_tracking`] for the built-in reference kinds.
pub fn run_tracking_signal(
    p: &Params,
    config: &SimConfig,
    w0: &GridFunction,
    zhat0: &GridFunction,
    zeta0: f64,
    reference: ReferenceSignal,
) -> Result<Trace, ScenarioError> {
    run_tracking(p, config, w0, zhat0, zeta0, &reference)
}

/// Direct simulation of the observation-error dynamics
/// w̃_t = w̃_xx, w̃_x(0) = 0, w̃_x(1) = -b ζ̃ u₀ - c1 w̃(1), ζ̃' = sgn(b) u₀ w̃(1).
///
/// In the returned trace `zeta` holds ζ̃ and `w0`/`w1`/`wnorm` describe w̃.
pub fn run_error_system(
    p: &Params,
    config: &SimConfig,
    wtilde0: &GridFunction,
    zetatilde0: f64,
    u0: &dyn Signal,
) -> Result<Trace, ScenarioError> {
    validate_config(p, config)?;
    check_grid(wtilde0, config, "wtilde0")?;
    let dx = config.grid.dx();
    let n = config.grid.len();
    let sign = p.sign_b().as_f64();
    let mut rec = Recorder::new(config);
    let mut wt = wtilde0.values().to_vec();
    let mut next = vec![0.0; n];
    let mut zt = zetatilde0;
    let mut dissipated = 0.0;
    let mut t = 0.0;

    for k in 0..=rec.steps {
        t = k as f64 * config.dt;
        let u0_now = u0.at(t);
        let wnorm = fdm::l2_norm_slice(&wt, dx);
        if rec.wants_sample(k) {
            let e = 0.5 * wnorm * wnorm;
            let f = e + 0.5 * p.b().abs() * zt * zt;
            rec.samples.push(TraceSample {
                t,
                u0: u0_now,
                u: (1.0 / p.b() - zt) * u0_now,
                zeta: zt,
                w0: wt[0],
                w1: wt[n - 1],
                wnorm,
                obs_err_norm: Some(wnorm),
                energy_e: Some(e),
                energy_f: Some(f),
                energy_v: Some(f),
                dissipated: Some(dissipated),
                reference: None,
                servo_flux: None,
            });
        }
        if rec.wants_snapshot(k) {
            rec.snapshots.push(Snapshot {
                t,
                w: grid_function(config, &wt),
                what: None,
            });
        }
        if k == rec.steps {
            break;
        }
        dissipated += config.dt * (fdm::gradient_energy_slice(&wt, dx) + p.c1() * wt[n - 1] * wt[n - 1]);
        let bc = FluxBC::new(0.0, -p.b() * zt * u0_now - p.c1() * wt[n - 1]);
        step_heat_into(&wt, &mut next, dx, bc, config.dt, None)?;
        std::mem::swap(&mut wt, &mut next);
        zt += sign * u0_now * wt[n - 1] * config.dt;
        if !zt.is_finite() {
            return Err(FdmError::NonFiniteState { index: n }.into());
        }
    }

    Ok(Trace {
        samples: rec.samples,
        snapshots: rec.snapshots,
        final_state: FinalState {
            t,
            w: grid_function(config, &wt),
            what: None,
            zeta: zt,
            u0: u0.at(t),
            u: (1.0 / p.b() - zt) * u0.at(t),
        },
        outcome: Outcome::Completed,
    })
}

/// Initial plant profile w(x, 0) = q·x - 1.
pub fn affine_initial_state(p: &Params, config: &SimConfig) -> GridFunction {
    GridFunction::from_fn(config.grid, |x| p.q() * x - 1.0).expect("affine profile is finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Grid;

    fn short(t_final: f64) -> SimConfig {
        SimConfig {
            sample_stride: 10,
            ..SimConfig::default()
        }
        .with_horizon(t_final)
    }

    #[test]
    fn zero_is_an_equilibrium_everywhere() {
        let p = Params::nominal();
        let c = short(0.2);
        let z = GridFunction::zeros(c.grid);
        let open = run_open_loop(&p, &c, &z).unwrap();
        assert!(open.samples.iter().all(|s| s.wnorm == 0.0));
        let stab = run_stabilization(&p, &c, &z, &z, 0.0).unwrap();
        assert!(stab.samples.iter().all(|s| s.wnorm == 0.0 && s.zeta == 0.0 && s.u == 0.0));
        let track = run_tracking(&p, &c, &z, &z, 0.0, &ReferenceSignal::Zero).unwrap();
        assert!(track.samples.iter().all(|s| s.wnorm == 0.0 && s.zeta == 0.0));
        let err = run_error_system(&p, &c, &z, 0.0, &U0Signal::Constant { value: 1.0 }).unwrap();
        assert!(err.samples.iter().all(|s| s.wnorm == 0.0 && s.zeta == 0.0));
    }

    #[test]
    fn matched_observer_stays_matched() {
        let p = Params::nominal();
        let c = short(1.0);
        let w0 = affine_initial_state(&p, &c);
        let u0 = |t: f64| (3.0 * t).cos() + 0.5;
        let tr = run_observer(&p, &c, &w0, &w0, 1.0 / p.b(), &u0).unwrap();
        for s in &tr.samples {
            assert!(s.obs_err_norm.unwrap() <= 1e-10);
            assert!((s.zeta - 1.0 / p.b()).abs() <= 1e-14);
        }
    }

    #[test]
    fn zero_u0_freezes_zeta() {
        let p = Params::nominal();
        let c = short(1.0);
        let w0 = affine_initial_state(&p, &c);
        let tr = run_observer(&p, &c, &w0, &GridFunction::zeros(c.grid), 0.25, &U0Signal::Zero).unwrap();
        assert!(tr.samples.iter().all(|s| s.zeta == 0.25));
        let first = tr.samples[0].obs_err_norm.unwrap();
        let last = tr.last().obs_err_norm.unwrap();
        assert!(last < 0.5 * first, "{first} -> {last}");
    }

    #[test]
    fn mismatched_grids_rejected() {
        let p = Params::nominal();
        let c = short(0.1);
        let other = GridFunction::zeros(Grid::new(11).unwrap());
        assert_eq!(
            run_open_loop(&p, &c, &other).unwrap_err(),
            ScenarioError::GridMismatch("w0")
        );
    }

    #[test]
    fn cfl_checked_before_running() {
        let p = Params::nominal();
        let c = short(0.1).with_resolution(0.02, 5e-4).unwrap();
        let w0 = GridFunction::zeros(c.grid);
        assert!(matches!(
            run_stabilization(&p, &c, &w0, &w0, 0.0),
            Err(ScenarioError::Config(DomainError::CflViolation { .. }))
        ));
    }

    #[test]
    fn open_loop_blow_up_is_recorded() {
        let p = Params::new(2.0, -10.0, 5.0, 5.0).unwrap();
        let c = short(8.0);
        let tr = run_open_loop(&p, &c, &affine_initial_state(&p, &c)).unwrap();
        match tr.outcome {
            Outcome::BlowUp { t, norm } => {
                assert!(norm > BLOW_UP_NORM);
                assert!(t < 8.0);
                assert_eq!(tr.last().t, t);
            }
            Outcome::Completed => panic!("expected blow-up"),
        }
    }

    #[test]
    fn sample_times_strictly_increase() {
        let p = Params::nominal();
        let c = SimConfig {
            sample_stride: 7,
            ..SimConfig::default()
        }
        .with_horizon(0.1);
        let tr = run_stabilization(&p, &c, &affine_initial_state(&p, &c), &GridFunction::zeros(c.grid), 0.0).unwrap();
        assert!(tr.samples.windows(2).all(|w| w[1].t > w[0].t));
        assert!((tr.last().t - 0.1).abs() < 1e-12);
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let p = Params::nominal();
        let c = short(0.5);
        let w0 = affine_initial_state(&p, &c);
        let z = GridFunction::zeros(c.grid);
        let r = ReferenceSignal::constant(3.0).unwrap();
        let a = run_tracking(&p, &c, &w0, &z, 0.0, &r).unwrap();
        let b = run_tracking(&p, &c, &w0, &z, 0.0, &r).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn snapshots_follow_stride() {
        let p = Params::nominal();
        let c = SimConfig {
            snapshot_stride: 250,
            ..SimConfig::default()
        }
        .with_horizon(0.1);
        let w0 = affine_initial_state(&p, &c);
        let tr = run_stabilization(&p, &c, &w0, &GridFunction::zeros(c.grid), 0.0).unwrap();
        let times: Vec<f64> = tr.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(times.len(), 5);
        assert!(tr.snapshots.iter().all(|s| s.what.is_some()));
    }
}
