//! Modal Galerkin solver for the observation-error system
//!
//! w̃_t = w̃_xx, w̃_x(0) = 0, w̃_x(1) = -b ζ̃ u₀ - c1 w̃(1), ζ̃' = sgn(b) u₀ w̃(1).
//!
//! Writing w̃ ≈ Σ aₙ φₙ with -φₙ'' = λₙ φₙ, φₙ'(0) = 0 gives
//! aₙ' = -λₙ aₙ - φₙ(1)(b ζ̃ u₀ + c1 y), ζ̃' = sgn(b) u₀ y, with y = Σ aₙ φₙ(1).

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use super::AnalysisError;
use crate::domain::{FinalState, GridFunction, Outcome, Params, Trace, TraceSample};
use crate::fdm;
use crate::scenarios::Signal;

/// RK4 is stable on the negative real axis up to about -2.785.
const RK4_REAL_STABILITY: f64 = 2.78;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModalBasis {
    /// φₙ = √2 sin((n-½)πx), λₙ = (n-½)²π². Vanishes at x = 0.
    MixedSine,
    /// φ₁ = 1, φₙ = √2 cos((n-1)πx), λₙ = ((n-1)π)². Satisfies φₙ'(0) = 0.
    #[default]
    NeumannCosine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub index: usize,
    pub basis: ModalBasis,
}

impl EigenPair {
    /// `index` starts at 1.
    pub fn new(index: usize, basis: ModalBasis) -> Self {
        assert!(index >= 1, "mode indices start at 1");
        EigenPair { index, basis }
    }

    pub fn frequency(&self) -> f64 {
        match self.basis {
            ModalBasis::MixedSine => (self.index as f64 - 0.5) * PI,
            ModalBasis::NeumannCosine => (self.index - 1) as f64 * PI,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.frequency().powi(2)
    }

    pub fn phi(&self, x: f64) -> f64 {
        match self.basis {
            ModalBasis::MixedSine => SQRT_2 * (self.frequency() * x).sin(),
            ModalBasis::NeumannCosine if self.index == 1 => 1.0,
            ModalBasis::NeumannCosine => SQRT_2 * (self.frequency() * x).cos(),
        }
    }

    pub fn dphi(&self, x: f64) -> f64 {
        let k = self.frequency();
        match self.basis {
            ModalBasis::MixedSine => SQRT_2 * k * (k * x).cos(),
            ModalBasis::NeumannCosine if self.index == 1 => 0.0,
            ModalBasis::NeumannCosine => -SQRT_2 * k * (k * x).sin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GalerkinConfig {
    pub modes: usize,
    pub basis: ModalBasis,
    pub t_final: f64,
    pub dt: f64,
    pub sample_stride: usize,
}

impl Default for GalerkinConfig {
    fn default() -> Self {
        GalerkinConfig {
            modes: 16,
            basis: ModalBasis::NeumannCosine,
            t_final: 1.0,
            dt: 1e-4,
            sample_stride: 100,
        }
    }
}

struct Modes {
    lambda: Vec<f64>,
    at_one: Vec<f64>,
    /// φₙ sampled on the reconstruction grid, row per mode.
    table: Vec<Vec<f64>>,
}

struct Rhs<'a> {
    modes: &'a Modes,
    b: f64,
    sign: f64,
    c1: f64,
}

impl Rhs<'_> {
    fn eval(&self, a: &[f64], zt: f64, u0: f64, da: &mut [f64]) -> f64 {
        let y = boundary_value(a, &self.modes.at_one);
        let forcing = self.b * zt * u0 + self.c1 * y;
        for (j, d) in da.iter_mut().enumerate() {
            *d = -self.modes.lambda[j] * a[j] - self.modes.at_one[j] * forcing;
        }
        self.sign * u0 * y
    }
}

fn boundary_value(a: &[f64], at_one: &[f64]) -> f64 {
    a.iter().zip(at_one).map(|(a, p)| a * p).sum()
}

/// Integrates the truncated modal system with classical RK4.
///
/// The initial error is projected with trapezoid inner products on its own
/// grid, and the field is reconstructed on that grid at every sample. The
/// energies in the trace are the modal ones, ½Σaₙ² + (|b|/2)ζ̃².
pub fn galerkin_error_system(
    p: &Params,
    config: &GalerkinConfig,
    u0: &dyn Signal,
    wtilde0: &GridFunction,
    zetatilde0: f64,
) -> Result<Trace, AnalysisError> {
    if config.modes == 0 {
        return Err(AnalysisError::NoModes);
    }
    if !(config.dt > 0.0) || !(config.t_final >= config.dt) || config.sample_stride == 0 {
        return Err(AnalysisError::InvalidArgument {
            name: "config",
            reason: format!(
                "need dt > 0, t_final >= dt and sample_stride >= 1 (got {}, {}, {})",
                config.dt, config.t_final, config.sample_stride
            ),
        });
    }
    let grid = wtilde0.grid();
    let dx = grid.dx();
    let pairs: Vec<EigenPair> = (1..=config.modes).map(|n| EigenPair::new(n, config.basis)).collect();
    let top = pairs.last().expect("modes >= 1");
    let resolution = top.frequency() * dx;
    if resolution >= 1.0 {
        return Err(AnalysisError::UnresolvableMode {
            mode: top.index,
            resolution,
        });
    }
    if top.lambda() * config.dt > RK4_REAL_STABILITY {
        return Err(AnalysisError::UnstableStep {
            dt: config.dt,
            lambda: top.lambda(),
        });
    }

    let modes = Modes {
        lambda: pairs.iter().map(EigenPair::lambda).collect(),
        at_one: pairs.iter().map(|e| e.phi(1.0)).collect(),
        table: pairs.iter().map(|e| grid.nodes().map(|x| e.phi(x)).collect()).collect(),
    };
    let rhs = Rhs {
        modes: &modes,
        b: p.b(),
        sign: p.sign_b().as_f64(),
        c1: p.c1(),
    };

    let mut a: Vec<f64> = modes
        .table
        .iter()
        .map(|phi| fdm::inner_slice(phi, wtilde0.values(), dx))
        .collect();
    let mut zt = zetatilde0;
    let m = a.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut stage = vec![0.0; m];
    let mut field = vec![0.0; grid.len()];

    let steps = (config.t_final / config.dt).round() as usize;
    let mut samples = Vec::with_capacity(steps / config.sample_stride + 2);
    let mut dissipated = 0.0;
    let mut t = 0.0;
    let half = 0.5 * config.dt;

    for k in 0..=steps {
        t = k as f64 * config.dt;
        let u0_now = u0.at(t);
        let y = boundary_value(&a, &modes.at_one);
        if k % config.sample_stride == 0 || k == steps {
            reconstruct(&modes, &a, &mut field);
            let wnorm = fdm::l2_norm_slice(&field, dx);
            let e = 0.5 * a.iter().map(|v| v * v).sum::<f64>();
            let f = e + 0.5 * p.b().abs() * zt * zt;
            samples.push(TraceSample {
                t,
                u0: u0_now,
                u: (1.0 / p.b() - zt) * u0_now,
                zeta: zt,
                w0: field[0],
                w1: y,
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
        if k == steps {
            break;
        }
        dissipated += config.dt
            * (a.iter().zip(&modes.lambda).map(|(a, l)| l * a * a).sum::<f64>() + p.c1() * y * y);

        let u_mid = u0.at(t + half);
        let u_end = u0.at(t + config.dt);
        let z1 = rhs.eval(&a, zt, u0_now, &mut k1);
        axpy(&a, half, &k1, &mut stage);
        let z2 = rhs.eval(&stage, zt + half * z1, u_mid, &mut k2);
        axpy(&a, half, &k2, &mut stage);
        let z3 = rhs.eval(&stage, zt + half * z2, u_mid, &mut k3);
        axpy(&a, config.dt, &k3, &mut stage);
        let z4 = rhs.eval(&stage, zt + config.dt * z3, u_end, &mut k4);
        for j in 0..m {
            a[j] += config.dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        zt += config.dt / 6.0 * (z1 + 2.0 * z2 + 2.0 * z3 + z4);
        if !zt.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(AnalysisError::InvalidArgument {
                name: "dt",
                reason: format!("modal state became non-finite at t = {t}"),
            });
        }
    }

    reconstruct(&modes, &a, &mut field);
    let w = GridFunction::from_values(grid, field)?;
    Ok(Trace {
        samples,
        snapshots: Vec::new(),
        final_state: FinalState {
            t,
            w,
            what: None,
            zeta: zt,
            u0: u0.at(t),
            u: (1.0 / p.b() - zt) * u0.at(t),
        },
        outcome: Outcome::Completed,
    })
}

fn axpy(x: &[f64], h: f64, k: &[f64], out: &mut [f64]) {
    for ((o, x), k) in out.iter_mut().zip(x).zip(k) {
        *o = x + h * k;
    }
}

fn reconstruct(modes: &Modes, a: &[f64], field: &mut [f64]) {
    field.iter_mut().for_each(|v| *v = 0.0);
    for (coef, phi) in a.iter().zip(&modes.table) {
        for (v, p) in field.iter_mut().zip(phi) {
            *v += coef * p;
        }
    }
}
