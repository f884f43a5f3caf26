//! Model-independent view of a solved problem.

use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::gbm::{solve_gbm, GbmSolution};
use crate::model::{Model, ProblemSpec, StrategyClass};
use crate::xou::{solve_xou, XouSolution};

/// A value that may be `+infinity` when waiting forever is optimal.
///
/// The infinite case is a separate variant so it never enters arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Valuation {
    Finite(f64),
    Infinite,
}

impl Valuation {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Valuation::Infinite)
    }
}

impl Serialize for Valuation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Valuation::Finite(v) => serializer.serialize_f64(*v),
            Valuation::Infinite => serializer.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertaintyEquivalent {
    pub ce: Valuation,
    /// `ce - nu * price`.
    pub premium: Valuation,
}

/// A function value with its first two derivatives in the state variable of
/// the generator (`s` for GBM, log-price `z` for XOU).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

pub(crate) fn certainty_equivalent_from(
    problem: &ProblemSpec,
    price: f64,
    value: Valuation,
    in_continuation: bool,
) -> Result<CertaintyEquivalent> {
    let Valuation::Finite(v) = value else {
        return Ok(CertaintyEquivalent {
            ce: Valuation::Infinite,
            premium: Valuation::Infinite,
        });
    };
    let immediate = problem.nu() * price;
    if !in_continuation {
        return Ok(CertaintyEquivalent {
            ce: Valuation::Finite(immediate),
            premium: Valuation::Finite(0.0),
        });
    }
    let ce = problem.utility().inverse(v)?;
    let mut premium = ce - immediate;
    // round-off right below the threshold, where V and U agree to second order
    if premium < 0.0 && premium > -1e-12 * immediate.max(1.0) {
        premium = 0.0;
    }
    Ok(CertaintyEquivalent {
        ce: Valuation::Finite(ce),
        premium: Valuation::Finite(premium),
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Solution {
    Gbm(GbmSolution),
    Xou(XouSolution),
}

/// Solve any supported problem.
pub fn solve(problem: &ProblemSpec) -> Result<Solution> {
    match problem.model() {
        Model::Gbm(_) => solve_gbm(problem).map(Solution::Gbm),
        Model::Xou(_) => solve_xou(problem).map(Solution::Xou),
    }
}

impl Solution {
    pub fn problem(&self) -> &ProblemSpec {
        match self {
            Solution::Gbm(s) => &s.problem,
            Solution::Xou(s) => &s.problem,
        }
    }

    pub fn strategy(&self) -> StrategyClass {
        match self {
            Solution::Gbm(s) => s.strategy,
            Solution::Xou(s) => StrategyClass::Threshold(s.threshold()),
        }
    }

    /// Sale threshold as a unit price, if the strategy has one.
    pub fn threshold(&self) -> Option<f64> {
        self.strategy().level()
    }

    /// Pasting coefficient of the continuation branch (A, B, K, D or M).
    pub fn coefficient(&self) -> Option<f64> {
        match self {
            Solution::Gbm(s) => s.coefficient,
            Solution::Xou(s) => Some(s.coefficient),
        }
    }

    pub fn in_continuation(&self, price: f64) -> bool {
        match self {
            Solution::Gbm(s) => s.in_continuation(price),
            Solution::Xou(s) => s.in_continuation(price),
        }
    }

    pub fn value(&self, price: f64) -> Result<Valuation> {
        match self {
            Solution::Gbm(s) => s.value(price),
            Solution::Xou(s) => s.value(price).map(Valuation::Finite),
        }
    }

    pub fn certainty_equivalent(&self, price: f64) -> Result<CertaintyEquivalent> {
        match self {
            Solution::Gbm(s) => s.certainty_equivalent(price),
            Solution::Xou(s) => s.certainty_equivalent(price),
        }
    }

    /// Continuation-branch formula at `price`; `None` for trivial strategies.
    pub fn continuation_jet(&self, price: f64) -> Result<Option<Jet>> {
        match self {
            Solution::Gbm(s) => Ok(s.continuation_jet(price)),
            Solution::Xou(s) => s.continuation_jet(price).map(Some),
        }
    }

    pub fn payoff_jet(&self, price: f64) -> Result<Jet> {
        match self {
            Solution::Gbm(s) => s.payoff_jet(price),
            Solution::Xou(s) => s.payoff_jet(price),
        }
    }

    /// The jet of the value function itself: the active branch at `price`.
    pub fn value_jet(&self, price: f64) -> Result<Option<Jet>> {
        if self.in_continuation(price) {
            self.continuation_jet(price)
        } else {
            self.payoff_jet(price).map(Some)
        }
    }

    /// `(L - r) f` at `price` for `f` given by `jet`, with its natural scale.
    pub fn generator_residual(&self, price: f64, jet: &Jet) -> (f64, f64) {
        match self {
            Solution::Gbm(s) => s.generator_residual(price, jet),
            Solution::Xou(s) => s.generator_residual(price, jet),
        }
    }
}
