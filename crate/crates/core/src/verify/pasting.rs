//! Value matching and smooth fit at the sale threshold.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solution::Solution;

pub const PASTING_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PastingReport {
    pub threshold: f64,
    /// Relative gap between continuation branch and payoff.
    pub value_gap: f64,
    /// Relative gap between their first derivatives.
    pub derivative_gap: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Compare both branches at the threshold. Requires a threshold strategy.
pub fn smooth_pasting_audit(solution: &Solution) -> Result<PastingReport> {
    let threshold = solution
        .threshold()
        .ok_or_else(|| Error::Usage(format!("{} strategy has no threshold", solution.strategy().label())))?;
    let branch = solution
        .continuation_jet(threshold)?
        .ok_or_else(|| Error::Usage("strategy has no continuation branch".into()))?;
    let payoff = solution.payoff_jet(threshold)?;
    let value_gap = relative_gap(branch.value, payoff.value);
    let derivative_gap = relative_gap(branch.d1, payoff.d1);
    Ok(PastingReport {
        threshold,
        value_gap,
        derivative_gap,
        tolerance: PASTING_TOLERANCE,
        passed: value_gap <= PASTING_TOLERANCE && derivative_gap <= PASTING_TOLERANCE,
    })
}
