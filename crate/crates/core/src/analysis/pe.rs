//! Finite-horizon persistent-excitation test.
//!
//! The limit lim_{t→∞} ∫_t^{t+τ} u₀ ≠ 0 cannot be read off a finite record.
//! We integrate over the K trailing windows [T-(k+1)τ, T-kτ] and call the
//! signal persistently exciting when every one of them has magnitude above
//! the threshold.

use serde::{Deserialize, Serialize};

use super::AnalysisError;

pub const DEFAULT_PE_WINDOWS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PEVerdict {
    pub is_pe: bool,
    /// Newest window first.
    pub window_integrals: Vec<f64>,
    pub window: f64,
    pub threshold: f64,
}

/// Classifies a sampled signal; `times` must be increasing.
pub fn pe_check(
    times: &[f64],
    values: &[f64],
    window: f64,
    threshold: f64,
    windows: usize,
) -> Result<PEVerdict, AnalysisError> {
    if times.len() != values.len() {
        return Err(AnalysisError::LengthMismatch {
            times: times.len(),
            values: values.len(),
        });
    }
    if !(window > 0.0 && window.is_finite()) || windows == 0 || !(threshold >= 0.0) {
        return Err(AnalysisError::InvalidArgument {
            name: "window",
            reason: format!("need window > 0, threshold >= 0 and at least one window (got {window}, {threshold}, {windows})"),
        });
    }
    let required = window * windows as f64;
    let available = match (times.first(), times.last()) {
        (Some(a), Some(b)) if times.len() >= 2 => b - a,
        _ => 0.0,
    };
    // allow for rounding in sample times
    if available + 1e-9 * required < required {
        return Err(AnalysisError::InsufficientDuration { required, available });
    }

    let cumulative = cumulative_trapezoid(times, values);
    let end = *times.last().expect("checked non-empty");
    let window_integrals: Vec<f64> = (0..windows)
        .map(|k| {
            let hi = end - k as f64 * window;
            let lo = (hi - window).max(times[0]);
            integral_to(times, values, &cumulative, hi) - integral_to(times, values, &cumulative, lo)
        })
        .collect();
    let is_pe = window_integrals.iter().all(|v| v.abs() > threshold);
    Ok(PEVerdict {
        is_pe,
        window_integrals,
        window,
        threshold,
    })
}

fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(times.len());
    acc.push(0.0);
    for i in 1..times.len() {
        let prev = acc[i - 1];
        acc.push(prev + 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]));
    }
    acc
}

/// ∫_{t₀}^{t} of the piecewise-linear interpolant.
fn integral_to(times: &[f64], values: &[f64], cumulative: &[f64], t: f64) -> f64 {
    let idx = times.partition_point(|&s| s <= t);
    if idx == 0 {
        return 0.0;
    }
    let i = idx - 1;
    if i + 1 >= times.len() {
        return cumulative[times.len() - 1];
    }
    let h = t - times[i];
    let span = times[i + 1] - times[i];
    let slope = (values[i + 1] - values[i]) / span;
    cumulative[i] + h * (values[i] + 0.5 * slope * h)
}
