//! Optimal sale under the exponential OU model.
//!
//! All three utilities lead to a threshold `e^b` on the price. The value in
//! the continuation region is a multiple of the increasing eigenfunction `F`
//! of the OU generator, and `b` is the unique root of the smooth-pasting
//! equation:
//!
//! | utility     | equation                               | coefficient                    |
//! |-------------|----------------------------------------|--------------------------------|
//! | exponential | `(1 - e^{-x}) F'(b) = x e^{-x} F(b)`   | `K = (1 - e^{-x}) / F(b)`      |
//! | log         | `F(b) = (b + ln nu) F'(b)`             | `D = (b + ln nu) / F(b)`       |
//! | power       | `F~'(p b) = F~(p b)`                   | `M = nu^p e^{p b} / (p F~(p b))` |
//!
//! where `x = gamma nu e^b` and `F~` is built on the powered process
//! `X^p`, whose log is OU with `theta` and `eta` scaled by `p`.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{power_reduced_params, Model, ProblemSpec, StrategyClass, Utility, XouParams};
use crate::root::{bisect, brent};
use crate::solution::{certainty_equivalent_from, CertaintyEquivalent, Jet, Valuation};
use crate::special::{Branch, Eigenfunctions, OuEigenParams};

#[derive(Debug, Clone, Serialize)]
pub struct XouSolution {
    /// Log-price threshold `b`.
    pub b: f64,
    /// `K`, `D` or `M`.
    pub coefficient: f64,
    /// Eigenfunction parameters actually used (reduced for power utility).
    pub eigen: OuEigenParams,
    /// Argument scaling of `F`: `p` for power utility, 1 otherwise.
    pub argument_scale: f64,
    pub problem: ProblemSpec,
    #[serde(skip)]
    xou: XouParams,
}

fn xou_params(problem: &ProblemSpec) -> Result<XouParams> {
    match problem.model() {
        Model::Xou(x) => Ok(*x),
        Model::Gbm(_) => Err(Error::Usage("XOU solver called on a GBM problem".into())),
    }
}

/// `(e^x - 1) / x`, continuous at 0.
fn expm1_ratio(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 + 0.5 * x
    } else {
        x.exp_m1() / x
    }
}

/// `(L^Z - r)(1 - e^{-gamma nu e^z})` rescaled by the positive factor
/// `e^{x} / x`, `x = gamma nu e^z`. Strictly decreasing in `z`.
fn exp_sign_function(xou: &XouParams, r: f64, gamma_nu: f64, z: f64) -> f64 {
    let x = gamma_nu * z.exp();
    0.5 * xou.eta * xou.eta * (1.0 - x) + xou.kappa * (xou.theta - z) - r * expm1_ratio(x)
}

/// Strict lower bound for the log-price threshold.
///
/// Exponential: the root `zeta` of the rescaled `(L^Z - r) U`, by bisection.
/// Log: `l = (kappa theta - r ln nu) / (kappa + r)`. Power: the root of
/// `kappa (theta~ - w) + eta~^2/2 - r` on the powered process, returned as a
/// log-price of the original asset (divided by `p`).
pub fn bracket_lower(problem: &ProblemSpec) -> Result<f64> {
    let xou = xou_params(problem)?;
    let r = problem.r();
    match *problem.utility() {
        Utility::Exponential { gamma } => {
            let gamma_nu = gamma * problem.nu();
            let h = |z: f64| exp_sign_function(&xou, r, gamma_nu, z);
            let step = xou.stationary_std().max(1e-3);
            let (mut lo, mut hi) = (xou.theta - step, xou.theta + step);
            let mut expansions = 0;
            while h(lo) <= 0.0 || h(hi) >= 0.0 {
                let width = hi - lo;
                if h(lo) <= 0.0 {
                    lo -= width;
                }
                if h(hi) >= 0.0 {
                    hi += width;
                }
                expansions += 1;
                if expansions > 200 {
                    return Err(Error::numerical(
                        "xou bracket",
                        format!("no sign change of h found in [{lo}, {hi}]"),
                    ));
                }
            }
            Ok(bisect(lo, hi, |z| h(z) > 0.0, 1e-14 * (1.0 + hi.abs())))
        }
        Utility::Log => Ok((xou.kappa * xou.theta - r * problem.nu().ln()) / (xou.kappa + r)),
        Utility::Power { p } => {
            let Model::Xou(reduced) = power_reduced_params(problem)? else { unreachable!() };
            let w = reduced.theta + reduced.eta * reduced.eta / (2.0 * reduced.kappa) - r / reduced.kappa;
            Ok(w / p)
        }
    }
}

/// Memoised `ln F` and `ln F'` for one solve.
struct EigenCache {
    eigen: Eigenfunctions,
    values: HashMap<(u64, u8), f64>,
    failure: Option<Error>,
}

impl EigenCache {
    fn new(eigen: Eigenfunctions) -> Self {
        Self {
            eigen,
            values: HashMap::new(),
            failure: None,
        }
    }

    fn ln_f(&mut self, z: f64, order: u8) -> Result<f64> {
        let key = (z.to_bits(), order);
        if let Some(v) = self.values.get(&key) {
            return Ok(*v);
        }
        let v = self.eigen.ln_abs(Branch::Increasing, z, order)?;
        self.values.insert(key, v);
        Ok(v)
    }

    /// `F'(z) / F(z)`, or NaN after recording the first failure.
    fn log_derivative(&mut self, z: f64) -> f64 {
        let result = self
            .ln_f(z, 1)
            .and_then(|d1| self.ln_f(z, 0).map(|d0| (d1 - d0).exp()));
        match result {
            Ok(v) => v,
            Err(e) => {
                self.failure.get_or_insert(e);
                f64::NAN
            }
        }
    }
}

/// Normalised smooth-pasting residual in the solve variable: negative below
/// the threshold and positive above it.
fn pasting_residual(utility: Utility, nu: f64, cache: &mut EigenCache, z: f64) -> f64 {
    let ratio = cache.log_derivative(z);
    match utility {
        Utility::Exponential { gamma } => {
            let x = gamma * nu * z.exp();
            (ratio * -(-x).exp_m1() - x * (-x).exp()) / x.max(1.0)
        }
        Utility::Log => (z + nu.ln()) * ratio - 1.0,
        Utility::Power { .. } => ratio - 1.0,
    }
}

/// Solve the XOU optimal-sale problem.
pub fn solve_xou(problem: &ProblemSpec) -> Result<XouSolution> {
    let xou = xou_params(problem)?;
    let r = problem.r();
    let nu = problem.nu();
    let utility = *problem.utility();
    let (eigen_model, argument_scale) = match utility {
        Utility::Power { p } => match power_reduced_params(problem)? {
            Model::Xou(reduced) => (reduced, p),
            Model::Gbm(_) => unreachable!(),
        },
        _ => (xou, 1.0),
    };
    let eigen = OuEigenParams::new(&eigen_model, r)?;
    let mut cache = EigenCache::new(Eigenfunctions::new(eigen));

    // Work in the variable w = scale * z, the argument of F.
    let lo = bracket_lower(problem)? * argument_scale;
    let step = 1.0 / eigen.scale();
    let mut residual = |w: f64| pasting_residual(utility, nu, &mut cache, w);
    let at_lo = residual(lo);
    if !(at_lo < 0.0) {
        return Err(Error::numerical(
            "xou threshold",
            format!("pasting residual {at_lo} at lower bracket {lo} is not negative"),
        ));
    }
    let mut hi = lo + step;
    let mut steps = 1usize;
    loop {
        let at_hi = residual(hi);
        if at_hi > 0.0 {
            break;
        }
        if !at_hi.is_finite() || steps > 10_000 {
            return Err(Error::numerical(
                "xou threshold",
                format!("no sign change between {lo} and {hi} (residual {at_hi})"),
            ));
        }
        hi += step;
        steps += 1;
    }
    let lo_bracket = hi - step;
    let w = brent(lo_bracket, hi, &mut residual, 1e-13 * (1.0 + hi.abs()), "xou threshold")?;
    if let Some(e) = cache.failure.take() {
        return Err(e);
    }

    let ln_f = cache.ln_f(w, 0)?;
    let coefficient = match utility {
        Utility::Exponential { gamma } => -(-(gamma * nu * w.exp())).exp_m1() * (-ln_f).exp(),
        Utility::Log => (w + nu.ln()) * (-ln_f).exp(),
        Utility::Power { p } => (p * nu.ln() + w - ln_f).exp() / p,
    };
    Ok(XouSolution {
        b: w / argument_scale,
        coefficient,
        eigen,
        argument_scale,
        problem: *problem,
        xou,
    })
}

impl XouSolution {
    /// Price threshold `e^b`.
    pub fn threshold(&self) -> f64 {
        self.b.exp()
    }

    pub fn log_threshold(&self) -> f64 {
        self.b
    }

    pub fn strategy(&self) -> StrategyClass {
        StrategyClass::Threshold(self.threshold())
    }

    pub fn params(&self) -> &XouParams {
        &self.xou
    }

    fn eigenfunctions(&self) -> Eigenfunctions {
        Eigenfunctions::new(self.eigen)
    }

    fn log_price(&self, x: f64) -> Result<f64> {
        if x > 0.0 && x.is_finite() {
            Ok(x.ln())
        } else {
            Err(Error::Domain(format!("XOU prices must be positive and finite, got {x}")))
        }
    }

    pub fn in_continuation(&self, x: f64) -> bool {
        x.ln() < self.b
    }

    /// Continuation branch `c F(scale ln x)` with derivatives in `z = ln x`.
    pub fn continuation_jet(&self, x: f64) -> Result<Jet> {
        let z = self.log_price(x)?;
        let e = self.eigenfunctions();
        let p = self.argument_scale;
        let w = p * z;
        let c = self.coefficient;
        Ok(Jet {
            value: c * e.f(w, 0)?,
            d1: c * p * e.f(w, 1)?,
            d2: c * p * p * e.f(w, 2)?,
        })
    }

    /// `U(nu e^z)` with derivatives in `z`.
    pub fn payoff_jet(&self, x: f64) -> Result<Jet> {
        let z = self.log_price(x)?;
        let nu = self.problem.nu();
        Ok(match *self.problem.utility() {
            Utility::Exponential { gamma } => {
                let y = gamma * nu * x;
                let e = (-y).exp();
                Jet {
                    value: -(-y).exp_m1(),
                    d1: y * e,
                    d2: y * e * (1.0 - y),
                }
            }
            Utility::Log => Jet {
                value: z + nu.ln(),
                d1: 1.0,
                d2: 0.0,
            },
            Utility::Power { p } => {
                let scaled = (p * (nu.ln() + z)).exp();
                Jet {
                    value: scaled / p,
                    d1: scaled,
                    d2: p * scaled,
                }
            }
        })
    }

    /// `(L^Z - r) f` at `x = e^z` and the sum of the absolute terms.
    pub fn generator_residual(&self, x: f64, jet: &Jet) -> (f64, f64) {
        let z = x.ln();
        let diffusion = 0.5 * self.xou.eta * self.xou.eta * jet.d2;
        let drift = self.xou.kappa * (self.xou.theta - z) * jet.d1;
        let discount = self.problem.r() * jet.value;
        (diffusion + drift - discount, diffusion.abs() + drift.abs() + discount.abs())
    }

    /// `V~(x, nu)`.
    pub fn value(&self, x: f64) -> Result<f64> {
        self.log_price(x)?;
        if self.in_continuation(x) {
            Ok(self.continuation_jet(x)?.value)
        } else {
            self.problem.payoff(x)
        }
    }

    pub fn certainty_equivalent(&self, x: f64) -> Result<CertaintyEquivalent> {
        let v = self.value(x)?;
        certainty_equivalent_from(&self.problem, x, Valuation::Finite(v), self.in_continuation(x))
    }
}
