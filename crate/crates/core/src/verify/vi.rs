//! Variational-inequality residuals `max{(L - r) V, U - V} = 0` on a grid.

use serde::Serialize;

use crate::error::Result;
use crate::solution::Solution;

/// Default bound on normalised residuals.
pub const VI_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Continuation,
    Stopping,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViPoint {
    pub price: f64,
    pub region: Region,
    /// `(L - r) V` over the sum of its absolute terms.
    pub generator: f64,
    /// `(U - V) / max(1, |U|, |V|)`.
    pub gap: f64,
    /// Violation of the equality expected in this region and of the
    /// inequality on the other term.
    pub violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ViReport {
    pub tolerance: f64,
    pub max_violation: f64,
    pub passed: bool,
    /// Grid points where the value is infinite and nothing was checked.
    pub skipped: usize,
    pub points: Vec<ViPoint>,
}

fn normalise(x: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        x / scale
    } else {
        x
    }
}

/// Residuals of the active branch at each grid price.
///
/// In the continuation region the generator term must vanish and the gap
/// must be non-positive; in the stopping region the gap vanishes and the
/// generator term must be non-positive.
pub fn vi_residual_grid(solution: &Solution, grid: &[f64]) -> Result<ViReport> {
    vi_residual_grid_with_tolerance(solution, grid, VI_TOLERANCE)
}

pub fn vi_residual_grid_with_tolerance(solution: &Solution, grid: &[f64], tolerance: f64) -> Result<ViReport> {
    let mut points = Vec::with_capacity(grid.len());
    let mut skipped = 0;
    for &price in grid {
        let Some(value) = solution.value_jet(price)? else {
            skipped += 1;
            continue;
        };
        let payoff = solution.payoff_jet(price)?;
        let (residual, scale) = solution.generator_residual(price, &value);
        let generator = normalise(residual, scale);
        let gap = (payoff.value - value.value) / 1f64.max(payoff.value.abs()).max(value.value.abs());
        let (region, violation) = if solution.in_continuation(price) {
            (Region::Continuation, generator.abs().max(gap.max(0.0)))
        } else {
            (Region::Stopping, gap.abs().max(generator.max(0.0)))
        };
        points.push(ViPoint {
            price,
            region,
            generator,
            gap,
            violation,
        });
    }
    let max_violation = points.iter().map(|p| p.violation).fold(0.0, f64::max);
    Ok(ViReport {
        tolerance,
        max_violation,
        passed: max_violation <= tolerance && points.iter().all(|p| p.violation.is_finite()),
        skipped,
        points,
    })
}
