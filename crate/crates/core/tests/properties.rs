//! Invariants of the solvers over randomly drawn parameters.

use proptest::prelude::*;
use sale_timing::{
    classify_strategy, compute_alpha, solve, GbmParams, Model, ProblemSpec, Regime, Utility, XouParams,
};

fn gbm_model() -> impl Strategy<Value = Model> {
    (0.0..0.15f64, 0.05..0.6f64).prop_map(|(mu, sigma)| Model::Gbm(GbmParams::new(mu, sigma).unwrap()))
}

fn xou_model() -> impl Strategy<Value = Model> {
    (0.1..3.0f64, -1.0..2.0f64, 0.05..0.6f64)
        .prop_map(|(k, t, e)| Model::Xou(XouParams::new(k, t, e).unwrap()))
}

fn spec(model: Model, utility: Utility, r: f64, nu: f64) -> ProblemSpec {
    ProblemSpec::new(model, utility, r, nu, 1.0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn alpha_solves_characteristic_quadratic(mu in -0.1..0.2f64, sigma in 0.05..1.0f64, r in 0.005..0.2f64) {
        let g = GbmParams::new(mu, sigma).unwrap();
        let a = compute_alpha(&g, r);
        prop_assert!(a > 0.0);
        let q = 0.5 * sigma * sigma * a * (a - 1.0) + mu * a - r;
        prop_assert!(q.abs() < 1e-12 * (1.0 + r));
        prop_assert_eq!(a > 1.0, r > mu);
    }

    #[test]
    fn gbm_exponential_threshold_depends_on_gamma_nu(
        mu in 0.03..0.15f64, sigma in 0.05..0.6f64, gamma in 0.05..3.0f64, c in 0.2..5.0f64
    ) {
        let m = Model::Gbm(GbmParams::new(mu, sigma).unwrap());
        let r = 0.6 * mu;
        let base = solve(&spec(m, Utility::exponential(gamma).unwrap(), r, 1.0)).unwrap();
        let scaled = solve(&spec(m, Utility::exponential(c * gamma).unwrap(), r, 1.0 / c)).unwrap();
        prop_assert!(rel(base.threshold().unwrap(), scaled.threshold().unwrap()) < 1e-10);
    }

    #[test]
    fn xou_exponential_threshold_depends_on_gamma_nu(m in xou_model(), gamma in 0.1..2.0f64, c in 0.25..4.0f64) {
        let base = solve(&spec(m, Utility::exponential(gamma).unwrap(), 0.03, 1.0)).unwrap();
        let scaled = solve(&spec(m, Utility::exponential(c * gamma).unwrap(), 0.03, 1.0 / c)).unwrap();
        prop_assert!(rel(base.threshold().unwrap(), scaled.threshold().unwrap()) < 1e-10);
    }

    #[test]
    fn gbm_log_threshold_times_quantity_is_constant(m in gbm_model(), nu in 0.1..10.0f64) {
        let one = solve(&spec(m, Utility::Log, 0.04, 1.0)).unwrap().threshold().unwrap();
        let other = solve(&spec(m, Utility::Log, 0.04, nu)).unwrap().threshold().unwrap();
        prop_assert!(rel(one, nu * other) < 1e-12);
    }

    #[test]
    fn xou_power_threshold_ignores_quantity(m in xou_model(), p in 0.05..1.0f64, nu in 0.1..10.0f64) {
        let u = Utility::power(p).unwrap();
        let one = solve(&spec(m, u, 0.03, 1.0)).unwrap().threshold().unwrap();
        let other = solve(&spec(m, u, 0.03, nu)).unwrap().threshold().unwrap();
        prop_assert!(rel(one, other) < 1e-10);
    }

    #[test]
    fn value_dominates_payoff_with_equality_when_stopping(
        m in prop_oneof![gbm_model(), xou_model()],
        which in 0..3usize,
        price_factor in 0.05..2.0f64,
    ) {
        let u = [Utility::exponential(0.7).unwrap(), Utility::Log, Utility::power(0.4).unwrap()][which];
        let r = match m { Model::Gbm(g) => 0.5 * g.mu + 0.01, Model::Xou(_) => 0.03 };
        let sol = solve(&spec(m, u, r, 1.0)).unwrap();
        let price = sol.threshold().unwrap_or(1.0) * price_factor;
        let payoff = sol.problem().payoff(price).unwrap();
        match sol.value(price).unwrap().finite() {
            None => prop_assert_eq!(sol.strategy().regime(), Regime::WaitForever),
            Some(v) if sol.in_continuation(price) => {
                prop_assert!(v >= payoff - 1e-12 * payoff.abs().max(1.0));
                let premium = sol.certainty_equivalent(price).unwrap().premium.finite().unwrap();
                prop_assert!(premium >= 0.0);
            }
            Some(v) => prop_assert_eq!(v, payoff),
        }
    }

    #[test]
    fn gbm_power_classification_matches_powered_drift(
        mu in -0.05..0.15f64, sigma in 0.05..0.6f64, p in 0.05..1.0f64, r in 0.005..0.1f64
    ) {
        let g = GbmParams::new(mu, sigma).unwrap();
        let regime = classify_strategy(&spec(Model::Gbm(g), Utility::power(p).unwrap(), r, 1.0));
        let expected = if g.power_drift(p) <= r { Regime::SellNow } else { Regime::WaitForever };
        prop_assert_eq!(regime, expected);
    }

    #[test]
    fn thresholds_decrease_in_quantity(m in prop_oneof![gbm_model(), xou_model()], nu in 0.2..5.0f64) {
        for u in [Utility::exponential(0.5).unwrap(), Utility::Log] {
            let r = match m { Model::Gbm(g) => 0.5 * g.mu + 0.001, Model::Xou(_) => 0.03 };
            let small = solve(&spec(m, u, r, nu)).unwrap();
            let large = solve(&spec(m, u, r, 1.5 * nu)).unwrap();
            if let (Some(a), Some(b)) = (small.threshold(), large.threshold()) {
                prop_assert!(b < a, "{u:?}: {a} then {b}");
            }
        }
    }
}
