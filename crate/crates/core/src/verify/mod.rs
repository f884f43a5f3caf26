//! Independent checks of analytic solutions.

mod mc;
mod pasting;
mod vi;

use serde::Serialize;

use crate::error::Result;
use crate::solution::Solution;

pub use mc::{
    default_horizon, mc_strategy_value, oracle_threshold_sweep, McConfig, McEstimate, SweepResult, DEFAULT_DT,
    HORIZON_DISCOUNT,
};
pub use pasting::{smooth_pasting_audit, PastingReport, PASTING_TOLERANCE};
pub use vi::{vi_residual_grid, vi_residual_grid_with_tolerance, Region, ViPoint, ViReport, VI_TOLERANCE};

/// Three consecutive continuation-region prices where the value function
/// bends upwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexityWitness {
    pub prices: [f64; 3],
    /// Divided second difference `2 [x0, x1, x2] V`.
    pub second_difference: f64,
}

/// First triple of `grid` (increasing, all in the continuation region) with
/// a positive second divided difference of the value, if any.
pub fn convexity_witness(solution: &Solution, grid: &[f64]) -> Result<Option<ConvexityWitness>> {
    let mut values = Vec::with_capacity(grid.len());
    for &x in grid.iter().take_while(|&&x| solution.in_continuation(x)) {
        match solution.value(x)?.finite() {
            Some(v) => values.push((x, v)),
            None => return Ok(None),
        }
    }
    for w in values.windows(3) {
        let [(x0, v0), (x1, v1), (x2, v2)] = [w[0], w[1], w[2]];
        let left = (v1 - v0) / (x1 - x0);
        let right = (v2 - v1) / (x2 - x1);
        let second = 2.0 * (right - left) / (x2 - x0);
        if second > 0.0 {
            return Ok(Some(ConvexityWitness {
                prices: [x0, x1, x2],
                second_difference: second,
            }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GbmParams, Model, ProblemSpec, Utility, XouParams};
    use crate::solution::solve;

    fn gbm(mu: f64, utility: Utility) -> Solution {
        solve(&ProblemSpec::new(Model::Gbm(GbmParams::new(mu, 0.2).unwrap()), utility, 0.02, 1.0, 1.0).unwrap())
            .unwrap()
    }

    fn xou(utility: Utility) -> Solution {
        solve(
            &ProblemSpec::new(
                Model::Xou(XouParams::new(0.6, 1.0, 0.2).unwrap()),
                utility,
                0.02,
                1.0,
                1.0,
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn gbm_exp_continuation_annihilated() {
        let sol = gbm(0.05, Utility::exponential(0.5).unwrap());
        let report = vi_residual_grid(&sol, &grid(0.01, 6.0, 200)).unwrap();
        assert!(report.passed, "{}", report.max_violation);
        for p in report.points.iter().filter(|p| p.region == Region::Continuation) {
            assert!(p.generator.abs() < 1e-14);
        }
    }

    #[test]
    fn gbm_log_stopping_generator_closed_form() {
        let sol = gbm(0.05, Utility::Log);
        let a = sol.threshold().unwrap();
        for s in [a, 1.5 * a, 10.0 * a] {
            let jet = sol.payoff_jet(s).unwrap();
            let (res, _) = sol.generator_residual(s, &jet);
            let expected = -0.02 + 0.05 - 0.02 * s.ln();
            assert!((res - expected).abs() < 1e-14);
            assert!(res < 0.0);
        }
        assert!(a > ((0.05 - 0.02) / 0.02f64).exp());
    }

    #[test]
    fn gbm_log_pasting_exact() {
        let report = smooth_pasting_audit(&gbm(0.05, Utility::Log)).unwrap();
        assert!(report.value_gap < 1e-15 && report.derivative_gap < 1e-15, "{report:?}");
    }

    #[test]
    fn xou_vi_and_pasting() {
        for u in [Utility::exponential(0.5).unwrap(), Utility::Log, Utility::power(0.3).unwrap()] {
            let sol = xou(u);
            let a = sol.threshold().unwrap();
            let report = vi_residual_grid(&sol, &grid(0.05, 2.0 * a, 60)).unwrap();
            assert!(report.passed, "{u:?}: {}", report.max_violation);
            assert!(smooth_pasting_audit(&sol).unwrap().passed);
        }
    }

    #[test]
    fn pasting_requires_threshold() {
        let sol = gbm(0.05, Utility::power(0.3).unwrap());
        assert!(smooth_pasting_audit(&sol).is_err());
    }

    #[test]
    fn wait_forever_points_are_skipped() {
        let sol = gbm(0.05, Utility::power(1.0).unwrap());
        let report = vi_residual_grid(&sol, &[1.0, 2.0]).unwrap();
        assert_eq!(report.skipped, 2);
        assert!(report.points.is_empty());
    }

    #[test]
    fn witness_for_convex_log_case() {
        let sol = gbm(0.01, Utility::Log);
        let a = sol.threshold().unwrap();
        assert!(convexity_witness(&sol, &grid(0.1, 0.99 * a, 20)).unwrap().is_some());
        let concave = gbm(0.05, Utility::Log);
        assert!(convexity_witness(&concave, &grid(0.1, 7.0, 20)).unwrap().is_none());
    }
}
