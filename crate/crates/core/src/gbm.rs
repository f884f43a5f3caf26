//! Optimal sale under geometric Brownian motion.
//!
//! The increasing solution of `(sigma^2 s^2/2) f'' + mu s f' = r f` is `s^alpha`.
//! Exponential utility waits for the threshold `a_e` solving
//! `alpha (e^{gamma nu a} - 1) = gamma nu a` whenever `r < mu`; log utility
//! sells at `a_l = e^{1/alpha} / nu`; power utility is never a threshold
//! problem.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{classify_strategy, GbmParams, Model, ProblemSpec, Regime, StrategyClass, Utility};
use crate::root::{bisect, brent};
use crate::solution::{certainty_equivalent_from, CertaintyEquivalent, Jet, Valuation};

/// Positive root of `(sigma^2/2) a^2 + (mu - sigma^2/2) a - r = 0`.
///
/// `alpha < 1` iff `r < mu` and `alpha >= 1` iff `r >= mu`.
pub fn compute_alpha(gbm: &GbmParams, r: f64) -> f64 {
    let s2 = gbm.sigma * gbm.sigma;
    let m = gbm.mu / s2;
    (0.5 - m) + ((m - 0.5).powi(2) + 2.0 * r / s2).sqrt()
}

/// Negative root of the same quadratic; `s^beta` is the decreasing solution.
pub fn compute_beta(gbm: &GbmParams, r: f64) -> f64 {
    let s2 = gbm.sigma * gbm.sigma;
    let m = gbm.mu / s2;
    (0.5 - m) - ((m - 0.5).powi(2) + 2.0 * r / s2).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GbmSolution {
    pub alpha: f64,
    pub strategy: StrategyClass,
    /// `A` (exponential) or `B` (log) of the continuation branch.
    pub coefficient: Option<f64>,
    pub problem: ProblemSpec,
    #[serde(skip)]
    gbm: GbmParams,
}

fn gbm_params(problem: &ProblemSpec) -> Result<GbmParams> {
    match problem.model() {
        Model::Gbm(g) => Ok(*g),
        Model::Xou(_) => Err(Error::Usage("GBM solver called on an XOU problem".into())),
    }
}

/// `mu x - sigma^2 x^2 / 2 - r (e^x - 1)` in the scaled variable `x = gamma nu s`.
fn exp_generator_sign(gbm: &GbmParams, r: f64, x: f64) -> f64 {
    gbm.mu * x - 0.5 * gbm.sigma * gbm.sigma * x * x - r * x.exp_m1()
}

/// Unique positive root of the scaled `g`, which is strictly concave with
/// `g(0) = 0` and `g'(0) = mu - r > 0`.
fn exp_generator_root(gbm: &GbmParams, r: f64) -> Result<f64> {
    let mut hi = 1.0;
    let mut doublings = 0;
    while exp_generator_sign(gbm, r, hi) >= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::numerical("gbm bracket", "no sign change of g found"));
        }
    }
    Ok(bisect(0.0, hi, |x| exp_generator_sign(gbm, r, x) > 0.0, 1e-15 * hi))
}

/// Lower bracket `phi` (a price) for the exponential-utility threshold.
///
/// Only defined when `r < mu`; `a_e > phi` always holds.
pub fn exp_bracket_lower(problem: &ProblemSpec) -> Result<f64> {
    let gbm = gbm_params(problem)?;
    let Utility::Exponential { gamma } = *problem.utility() else {
        return Err(Error::Usage("GBM bracket requires exponential utility".into()));
    };
    if problem.r() >= gbm.mu {
        return Err(Error::Usage("no threshold exists when r >= mu".into()));
    }
    Ok(exp_generator_root(&gbm, problem.r())? / (gamma * problem.nu()))
}

/// Solve for the scaled threshold `x = gamma nu a_e` of `alpha (e^x - 1) - x = 0`.
fn solve_scaled_exp_threshold(gbm: &GbmParams, r: f64, alpha: f64) -> Result<f64> {
    let f = |x: f64| alpha * x.exp_m1() - x;
    let lo = exp_generator_root(gbm, r)?;
    if f(lo) >= 0.0 {
        return Err(Error::numerical(
            "gbm threshold",
            format!("threshold equation is {} at the lower bracket {lo}", f(lo)),
        ));
    }
    let mut hi = (2.0 * lo).max(lo + 1.0);
    let mut doublings = 0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::numerical("gbm threshold", format!("no upper bracket above {lo}")));
        }
    }
    brent(lo, hi, f, 1e-14 * hi, "gbm threshold")
}

/// Solve the GBM optimal-sale problem.
pub fn solve_gbm(problem: &ProblemSpec) -> Result<GbmSolution> {
    let gbm = gbm_params(problem)?;
    let r = problem.r();
    let nu = problem.nu();
    let alpha = compute_alpha(&gbm, r);
    let (strategy, coefficient) = match (*problem.utility(), classify_strategy(problem)) {
        (Utility::Exponential { gamma }, Regime::Threshold) => {
            let x = solve_scaled_exp_threshold(&gbm, r, alpha)?;
            let a_e = x / (gamma * nu);
            let coefficient = -(-x).exp_m1() * a_e.powf(-alpha);
            (StrategyClass::Threshold(a_e), Some(coefficient))
        }
        (Utility::Log, _) => {
            let a_l = (1.0 / alpha).exp() / nu;
            (StrategyClass::Threshold(a_l), Some(1.0 / (alpha * std::f64::consts::E)))
        }
        (_, Regime::SellNow) => (StrategyClass::SellNow, None),
        (_, Regime::WaitForever) => (StrategyClass::WaitForever, None),
        (u, Regime::Threshold) => {
            return Err(Error::numerical("gbm", format!("unexpected threshold regime for {}", u.name())))
        }
    };
    Ok(GbmSolution {
        alpha,
        strategy,
        coefficient,
        problem: *problem,
        gbm,
    })
}

impl GbmSolution {
    pub fn params(&self) -> &GbmParams {
        &self.gbm
    }

    pub fn threshold(&self) -> Option<f64> {
        self.strategy.level()
    }

    fn check_domain(&self, s: f64) -> Result<()> {
        let ok = match self.problem.utility() {
            Utility::Log => s > 0.0,
            _ => s >= 0.0,
        };
        if ok && s.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "price {s} outside the domain of {} utility",
                self.problem.utility().name()
            )))
        }
    }

    /// True when waiting is strictly optimal at price `s`.
    pub fn in_continuation(&self, s: f64) -> bool {
        match self.strategy {
            StrategyClass::Threshold(a) => s < a,
            StrategyClass::WaitForever => true,
            StrategyClass::SellNow => false,
        }
    }

    /// Continuation branch `A s^alpha` or `B (nu s)^alpha` with derivatives in `s`.
    ///
    /// Evaluated by formula at any price, including the stopping region.
    pub fn continuation_jet(&self, s: f64) -> Option<Jet> {
        let c = self.coefficient?;
        let a = self.alpha;
        let scale = match self.problem.utility() {
            Utility::Log => c * self.problem.nu().powf(a),
            _ => c,
        };
        let v = scale * s.powf(a);
        Some(Jet {
            value: v,
            d1: scale * a * s.powf(a - 1.0),
            d2: scale * a * (a - 1.0) * s.powf(a - 2.0),
        })
    }

    /// `U(nu s)` with derivatives in `s`.
    pub fn payoff_jet(&self, s: f64) -> Result<Jet> {
        self.check_domain(s)?;
        let nu = self.problem.nu();
        let u = self.problem.utility();
        Ok(Jet {
            value: u.eval(nu * s)?,
            d1: nu * u.derivative(nu * s),
            d2: nu * nu * u.second_derivative(nu * s),
        })
    }

    /// `(L^S - r) f` and the sum of the absolute terms.
    pub fn generator_residual(&self, s: f64, jet: &Jet) -> (f64, f64) {
        let diffusion = 0.5 * self.gbm.sigma * self.gbm.sigma * s * s * jet.d2;
        let drift = self.gbm.mu * s * jet.d1;
        let discount = self.problem.r() * jet.value;
        (diffusion + drift - discount, diffusion.abs() + drift.abs() + discount.abs())
    }

    /// `V(s, nu)`.
    pub fn value(&self, s: f64) -> Result<Valuation> {
        self.check_domain(s)?;
        if self.strategy == StrategyClass::WaitForever {
            return Ok(Valuation::Infinite);
        }
        if self.in_continuation(s) {
            let jet = self.continuation_jet(s).expect("threshold strategies carry a coefficient");
            Ok(Valuation::Finite(jet.value))
        } else {
            Ok(Valuation::Finite(self.problem.payoff(s)?))
        }
    }

    /// Certainty equivalent `U^{-1}(V)` and liquidation premium `C - nu s`.
    pub fn certainty_equivalent(&self, s: f64) -> Result<CertaintyEquivalent> {
        let value = self.value(s)?;
        certainty_equivalent_from(&self.problem, s, value, self.in_continuation(s))
    }
}
