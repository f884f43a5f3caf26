//! Price models, utilities and the optimal-sale problem statement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric Brownian motion `dS = mu S dt + sigma S dB`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub mu: f64,
    pub sigma: f64,
}

impl GbmParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        let params = Self { mu, sigma };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::validation("model.mu", "must be finite"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::validation("model.sigma", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Drift of `S^p`, itself a GBM: `p mu + p (p - 1) sigma^2 / 2`.
    pub fn power_drift(&self, p: f64) -> f64 {
        p * self.mu + 0.5 * p * (p - 1.0) * self.sigma * self.sigma
    }
}

/// Exponential OU model: price `X = e^Z` with `dZ = kappa (theta - Z) dt + eta dB`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XouParams {
    pub kappa: f64,
    pub theta: f64,
    pub eta: f64,
}

impl XouParams {
    pub fn new(kappa: f64, theta: f64, eta: f64) -> Result<Self> {
        let params = Self { kappa, theta, eta };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::validation("model.kappa", "must be finite and > 0"));
        }
        if !self.theta.is_finite() {
            return Err(Error::validation("model.theta", "must be finite"));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::validation("model.eta", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Stationary standard deviation of the log-price, `eta / sqrt(2 kappa)`.
    pub fn stationary_std(&self) -> f64 {
        self.eta / (2.0 * self.kappa).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Gbm(GbmParams),
    Xou(XouParams),
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Gbm(_) => "gbm",
            Model::Xou(_) => "xou",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Model::Gbm(p) => p.validate(),
            Model::Xou(p) => p.validate(),
        }
    }
}

/// Investor utility over cash proceeds `w`.
///
/// Power utility is `w^p / p` with `p = 1 - rho` for risk aversion
/// `rho in [0, 1)`; `p = 1` is the linear (risk-neutral) boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Utility {
    Exponential { gamma: f64 },
    Log,
    Power { p: f64 },
}

impl Utility {
    pub fn exponential(gamma: f64) -> Result<Self> {
        let u = Utility::Exponential { gamma };
        u.validate()?;
        Ok(u)
    }

    pub fn power(p: f64) -> Result<Self> {
        let u = Utility::Power { p };
        u.validate()?;
        Ok(u)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Utility::Exponential { gamma } if !(gamma.is_finite() && gamma > 0.0) => {
                Err(Error::validation("utility.gamma", "must be finite and > 0"))
            }
            Utility::Power { p } if !(p > 0.0 && p <= 1.0) => {
                Err(Error::validation("utility.p", "must lie in (0, 1]"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Utility::Exponential { .. } => "exponential",
            Utility::Log => "log",
            Utility::Power { .. } => "power",
        }
    }

    /// `U(w)`.
    pub fn eval(&self, w: f64) -> Result<f64> {
        match *self {
            Utility::Exponential { gamma } => Ok(-(-gamma * w).exp_m1()),
            Utility::Log => {
                if w > 0.0 {
                    Ok(w.ln())
                } else {
                    Err(Error::Domain(format!("log utility undefined at w = {w}")))
                }
            }
            Utility::Power { p } => {
                if w >= 0.0 {
                    Ok(w.powf(p) / p)
                } else {
                    Err(Error::Domain(format!("power utility undefined at w = {w}")))
                }
            }
        }
    }

    /// `U'(w)`, for `w` in the interior of the domain.
    pub fn derivative(&self, w: f64) -> f64 {
        match *self {
            Utility::Exponential { gamma } => gamma * (-gamma * w).exp(),
            Utility::Log => 1.0 / w,
            Utility::Power { p } => w.powf(p - 1.0),
        }
    }

    /// `U''(w)`, for `w` in the interior of the domain.
    pub fn second_derivative(&self, w: f64) -> f64 {
        match *self {
            Utility::Exponential { gamma } => -gamma * gamma * (-gamma * w).exp(),
            Utility::Log => -1.0 / (w * w),
            Utility::Power { p } => (p - 1.0) * w.powf(p - 2.0),
        }
    }

    /// `U^{-1}(v)`: the cash amount whose utility is `v`.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        match *self {
            Utility::Exponential { gamma } => {
                if v < 1.0 {
                    Ok(-(-v).ln_1p() / gamma)
                } else {
                    Err(Error::numerical(
                        "certainty equivalent",
                        format!("exponential utility level {v} is not below 1"),
                    ))
                }
            }
            Utility::Log => Ok(v.exp()),
            Utility::Power { p } => {
                if v >= 0.0 {
                    Ok((p * v).powf(1.0 / p))
                } else {
                    Err(Error::numerical(
                        "certainty equivalent",
                        format!("power utility level {v} is negative"),
                    ))
                }
            }
        }
    }
}

/// Full input of the optimal-sale problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    model: Model,
    utility: Utility,
    r: f64,
    nu: f64,
    initial_price: f64,
}

impl ProblemSpec {
    pub fn new(model: Model, utility: Utility, r: f64, nu: f64, initial_price: f64) -> Result<Self> {
        model.validate()?;
        utility.validate()?;
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::validation("r", "discount rate must be finite and > 0"));
        }
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::validation("nu", "quantity must be finite and > 0"));
        }
        if !(initial_price.is_finite() && initial_price > 0.0) {
            return Err(Error::validation("initial_price", "must be finite and > 0"));
        }
        Ok(Self {
            model,
            utility,
            r,
            nu,
            initial_price,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn utility(&self) -> &Utility {
        &self.utility
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn initial_price(&self) -> f64 {
        self.initial_price
    }

    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        Self::new(self.model, self.utility, self.r, nu, self.initial_price)
    }

    pub fn with_utility(&self, utility: Utility) -> Result<Self> {
        Self::new(self.model, utility, self.r, self.nu, self.initial_price)
    }

    pub fn with_initial_price(&self, initial_price: f64) -> Result<Self> {
        Self::new(self.model, self.utility, self.r, self.nu, initial_price)
    }

    /// Utility of selling all units at unit price `price`.
    pub fn payoff(&self, price: f64) -> Result<f64> {
        self.utility.eval(self.nu * price)
    }
}

/// Shape of the optimal strategy before any threshold is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SellNow,
    WaitForever,
    Threshold,
}

/// Optimal strategy with its sale level (unit price).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyClass {
    SellNow,
    WaitForever,
    Threshold(f64),
}

impl StrategyClass {
    pub fn regime(&self) -> Regime {
        match self {
            StrategyClass::SellNow => Regime::SellNow,
            StrategyClass::WaitForever => Regime::WaitForever,
            StrategyClass::Threshold(_) => Regime::Threshold,
        }
    }

    pub fn level(&self) -> Option<f64> {
        match *self {
            StrategyClass::Threshold(level) => Some(level),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            StrategyClass::SellNow => "sell_now",
            StrategyClass::WaitForever => "wait_forever",
            StrategyClass::Threshold(_) => "threshold",
        }
    }
}

/// Trivial-vs-threshold classification of a problem.
///
/// Under GBM, exponential utility sells immediately iff `r >= mu` and power
/// utility sells immediately iff the drift of `S^p` does not exceed `r`
/// (otherwise waiting forever is optimal). Log utility under GBM and every
/// XOU problem has a finite threshold.
pub fn classify_strategy(problem: &ProblemSpec) -> Regime {
    match (problem.model(), problem.utility()) {
        (Model::Gbm(gbm), Utility::Exponential { .. }) => {
            if problem.r() >= gbm.mu {
                Regime::SellNow
            } else {
                Regime::Threshold
            }
        }
        (Model::Gbm(gbm), Utility::Power { p }) => {
            if gbm.power_drift(*p) <= problem.r() {
                Regime::SellNow
            } else {
                Regime::WaitForever
            }
        }
        _ => Regime::Threshold,
    }
}

/// Parameters of the powered price process `S^p` (or `X^p`).
///
/// GBM maps to `(p mu + p (p - 1) sigma^2 / 2, p sigma)`; XOU keeps `kappa`
/// and scales `theta` and `eta` by `p`.
pub fn power_reduced_params(problem: &ProblemSpec) -> Result<Model> {
    let Utility::Power { p } = *problem.utility() else {
        return Err(Error::Usage(format!(
            "power_reduced_params requires power utility, got {}",
            problem.utility().name()
        )));
    };
    Ok(match *problem.model() {
        Model::Gbm(gbm) => Model::Gbm(GbmParams {
            mu: gbm.power_drift(p),
            sigma: p * gbm.sigma,
        }),
        Model::Xou(xou) => Model::Xou(XouParams {
            kappa: xou.kappa,
            theta: p * xou.theta,
            eta: p * xou.eta,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gbm_problem(mu: f64, utility: Utility, r: f64) -> ProblemSpec {
        ProblemSpec::new(Model::Gbm(GbmParams::new(mu, 0.2).unwrap()), utility, r, 1.0, 1.0).unwrap()
    }

    #[test]
    fn exponential_sells_now_at_r_equal_mu() {
        let p = gbm_problem(0.05, Utility::exponential(0.5).unwrap(), 0.05);
        assert_eq!(classify_strategy(&p), Regime::SellNow);
        let p = gbm_problem(0.05, Utility::exponential(0.5).unwrap(), 0.049);
        assert_eq!(classify_strategy(&p), Regime::Threshold);
    }

    #[test]
    fn power_classification_on_both_sides() {
        // mu~ = 0.3 * 0.05 + 0.5 * 0.3 * (-0.7) * 0.04 = 0.0108
        let p = gbm_problem(0.05, Utility::power(0.3).unwrap(), 0.02);
        assert_eq!(classify_strategy(&p), Regime::SellNow);
        let p = gbm_problem(0.05, Utility::power(1.0).unwrap(), 0.02);
        assert_eq!(classify_strategy(&p), Regime::WaitForever);
        let p = gbm_problem(0.05, Utility::power(0.3).unwrap(), 0.0107);
        assert_eq!(classify_strategy(&p), Regime::WaitForever);
    }

    #[test]
    fn log_and_xou_always_threshold() {
        let p = gbm_problem(-0.5, Utility::Log, 0.02);
        assert_eq!(classify_strategy(&p), Regime::Threshold);
        for u in [Utility::Log, Utility::power(0.4).unwrap(), Utility::exponential(3.0).unwrap()] {
            let p = ProblemSpec::new(Model::Xou(XouParams::new(0.6, 1.0, 0.2).unwrap()), u, 0.5, 1.0, 1.0)
                .unwrap();
            assert_eq!(classify_strategy(&p), Regime::Threshold);
        }
    }

    #[test]
    fn reduced_params_values() {
        let p = gbm_problem(0.05, Utility::power(0.3).unwrap(), 0.02);
        let Model::Gbm(g) = power_reduced_params(&p).unwrap() else { panic!() };
        assert!((g.mu - 0.0108).abs() < 1e-15);
        assert!((g.sigma - 0.06).abs() < 1e-15);

        let p = gbm_problem(0.05, Utility::power(1.0).unwrap(), 0.02);
        let Model::Gbm(g) = power_reduced_params(&p).unwrap() else { panic!() };
        assert_eq!((g.mu, g.sigma), (0.05, 0.2));

        let x = ProblemSpec::new(
            Model::Xou(XouParams::new(0.6, 1.0, 0.2).unwrap()),
            Utility::power(0.3).unwrap(),
            0.02,
            1.0,
            1.0,
        )
        .unwrap();
        let Model::Xou(r) = power_reduced_params(&x).unwrap() else { panic!() };
        assert_eq!(r.kappa, 0.6);
        assert!((r.theta - 0.3).abs() < 1e-15);
        assert!((r.eta - 0.06).abs() < 1e-15);
    }

    #[test]
    fn reduced_params_reject_other_utilities() {
        let p = gbm_problem(0.05, Utility::Log, 0.02);
        assert!(matches!(power_reduced_params(&p), Err(Error::Usage(_))));
    }

    #[test]
    fn power_drift_limits() {
        let g = GbmParams::new(0.05, 0.2).unwrap();
        assert_eq!(g.power_drift(1.0), 0.05);
        assert!(g.power_drift(1e-9).abs() < 1e-9);
    }

    #[test]
    fn validation_names_the_field() {
        let cases: Vec<(Result<ProblemSpec>, &str)> = vec![
            (
                ProblemSpec::new(Model::Gbm(GbmParams { mu: 0.1, sigma: 0.0 }), Utility::Log, 0.02, 1.0, 1.0),
                "model.sigma",
            ),
            (
                ProblemSpec::new(
                    Model::Xou(XouParams { kappa: -1.0, theta: 0.0, eta: 0.2 }),
                    Utility::Log,
                    0.02,
                    1.0,
                    1.0,
                ),
                "model.kappa",
            ),
            (
                ProblemSpec::new(
                    Model::Xou(XouParams { kappa: 1.0, theta: 0.0, eta: 0.0 }),
                    Utility::Log,
                    0.02,
                    1.0,
                    1.0,
                ),
                "model.eta",
            ),
            (
                ProblemSpec::new(Model::Gbm(GbmParams { mu: 0.1, sigma: 0.2 }), Utility::Log, 0.0, 1.0, 1.0),
                "r",
            ),
            (
                ProblemSpec::new(Model::Gbm(GbmParams { mu: 0.1, sigma: 0.2 }), Utility::Log, 0.02, -1.0, 1.0),
                "nu",
            ),
            (
                ProblemSpec::new(
                    Model::Gbm(GbmParams { mu: 0.1, sigma: 0.2 }),
                    Utility::Exponential { gamma: 0.0 },
                    0.02,
                    1.0,
                    1.0,
                ),
                "utility.gamma",
            ),
            (
                ProblemSpec::new(
                    Model::Gbm(GbmParams { mu: 0.1, sigma: 0.2 }),
                    Utility::Power { p: 1.5 },
                    0.02,
                    1.0,
                    1.0,
                ),
                "utility.p",
            ),
        ];
        for (result, field) in cases {
            match result {
                Err(Error::Validation { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected validation error for {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn utility_inverse_round_trips() {
        for u in [Utility::exponential(0.7).unwrap(), Utility::Log, Utility::power(0.3).unwrap()] {
            for w in [0.1, 1.0, 3.5] {
                let v = u.eval(w).unwrap();
                assert!((u.inverse(v).unwrap() - w).abs() < 1e-12 * w.max(1.0));
            }
        }
        assert!(matches!(Utility::Log.eval(0.0), Err(Error::Domain(_))));
    }
}
