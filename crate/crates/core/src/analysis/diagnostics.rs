//! Terminal values and Cauchy gaps over a trailing settle window.

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::domain::{Trace, TraceSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityLimit {
    pub name: String,
    pub terminal: f64,
    /// max |x(t) - x(T)| over [T - settle, T].
    pub gap: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSummary {
    pub settle_window: f64,
    pub gap_tolerance: f64,
    pub quantities: Vec<QuantityLimit>,
}

impl LimitSummary {
    pub fn get(&self, name: &str) -> Option<&QuantityLimit> {
        self.quantities.iter().find(|q| q.name == name)
    }

    pub fn all_converged(&self) -> bool {
        self.quantities.iter().all(|q| q.converged)
    }
}

type Column = (&'static str, fn(&TraceSample) -> Option<f64>);

const COLUMNS: [Column; 3] = [
    ("zeta", |s| Some(s.zeta)),
    ("wnorm", |s| Some(s.wnorm)),
    ("obs_err_norm", |s| s.obs_err_norm),
];

/// Checks ζ and every recorded norm for settling. A quantity is converged
/// when its gap is at most `gap_tolerance`, its terminal value is finite and
/// the run did not blow up.
pub fn limit_diagnostics(trace: &Trace, settle_window: f64, gap_tolerance: f64) -> Result<LimitSummary, AnalysisError> {
    let mut summary = limit_diagnostics_samples(&trace.samples, settle_window, gap_tolerance)?;
    if trace.blew_up() {
        summary.quantities.iter_mut().for_each(|q| q.converged = false);
    }
    Ok(summary)
}

/// [`limit_diagnostics`] for a bare sample record.
pub fn limit_diagnostics_samples(
    samples: &[TraceSample],
    settle_window: f64,
    gap_tolerance: f64,
) -> Result<LimitSummary, AnalysisError> {
    if !(settle_window > 0.0) {
        return Err(AnalysisError::InvalidArgument {
            name: "settle_window",
            reason: format!("must be positive, got {settle_window}"),
        });
    }
    let (first, last) = match (samples.first(), samples.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(AnalysisError::InsufficientDuration {
                required: 2.0 * settle_window,
                available: 0.0,
            })
        }
    };
    let end = last.t;
    let first = first.t;
    let available = end - first;
    let required = 2.0 * settle_window;
    if available + 1e-9 * required < required {
        return Err(AnalysisError::InsufficientDuration { required, available });
    }
    let start = end - settle_window - 1e-12 * settle_window.max(1.0);

    let quantities = COLUMNS
        .iter()
        .filter_map(|(name, get)| {
            let terminal = get(last)?;
            let gap = samples
                .iter()
                .filter(|s| s.t >= start)
                .filter_map(get)
                .map(|v| (v - terminal).abs())
                .fold(0.0, f64::max);
            Some(QuantityLimit {
                name: name.to_string(),
                terminal,
                gap,
                converged: terminal.is_finite() && gap <= gap_tolerance,
            })
        })
        .collect();
    Ok(LimitSummary {
        settle_window,
        gap_tolerance,
        quantities,
    })
}

/// |∫₀ᵀ dissipation dt - (F(0) - F(T))| from the recorded columns, or `None`
/// when the trace carries no energy bookkeeping.
pub fn energy_residual(samples: &[TraceSample]) -> Option<f64> {
    let first = samples.first()?;
    let last = samples.last()?;
    let drop = first.energy_f? - last.energy_f?;
    Some((last.dissipated? - drop).abs())
}

/// sqrt(∫ (a - b)² dt) by the trapezoid rule for two signals sampled at
/// the same times.
pub fn l2_time_gap(times: &[f64], a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    if times.len() != a.len() || a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch {
            times: times.len(),
            values: a.len().min(b.len()),
        });
    }
    let d2: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
    let integral: f64 = times
        .windows(2)
        .zip(d2.windows(2))
        .map(|(t, d)| 0.5 * (t[1] - t[0]) * (d[0] + d[1]))
        .sum();
    Ok(integral.sqrt())
}
