//! Optimal timing to sell a risky asset under risk aversion.
//!
//! Two price models are supported: geometric Brownian motion (trending
//! prices) and the exponential Ornstein-Uhlenbeck model (mean-reverting
//! prices). For exponential, log and power utility the crate computes the
//! optimal sale threshold, the value function, the certainty equivalent and
//! the liquidation premium, and ships independent checks (Monte-Carlo
//! valuation, variational-inequality residuals, smooth-pasting audits) that
//! validate every analytic solution.
//!
//! ```
//! use sale_timing::{solve, GbmParams, Model, ProblemSpec, Utility};
//!
//! let problem = ProblemSpec::new(
//!     Model::Gbm(GbmParams::new(0.05, 0.2).unwrap()),
//!     Utility::exponential(0.5).unwrap(),
//!     0.02,
//!     1.0,
//!     1.0,
//! )
//! .unwrap();
//! let solution = solve(&problem).unwrap();
//! let threshold = solution.threshold().unwrap();
//! assert!((threshold - 2.5129).abs() < 1e-3);
//! ```

pub mod error;
pub mod gbm;
pub mod model;
pub mod quadrature;
mod root;
pub mod solution;
pub mod special;
pub mod verify;
pub mod xou;

pub use error::{Error, Result};
pub use gbm::{compute_alpha, solve_gbm, GbmSolution};
pub use model::{
    classify_strategy, power_reduced_params, GbmParams, Model, ProblemSpec, Regime,
    StrategyClass, Utility, XouParams,
};
pub use quadrature::QuadratureConfig;
pub use solution::{solve, CertaintyEquivalent, Jet, Solution, Valuation};
pub use special::{eval_f, eval_g, Eigenfunctions, OuEigenParams};
pub use xou::{bracket_lower, solve_xou, XouSolution};
