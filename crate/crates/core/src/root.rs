//! Bracketed scalar root finding shared by the solvers.

use roots::{find_root_brent, Convergency};

use crate::error::{Error, Result};

/// Stops on an exact zero or once the bracket is narrower than `x_tol`.
struct BracketWidth {
    x_tol: f64,
    max_iter: usize,
}

impl Convergency<f64> for BracketWidth {
    fn is_root_found(&mut self, y: f64) -> bool {
        y == 0.0
    }

    fn is_converged(&mut self, x1: f64, x2: f64) -> bool {
        (x1 - x2).abs() <= self.x_tol
    }

    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter >= self.max_iter
    }
}

/// Brent's method on a sign-changing bracket `[lo, hi]`.
pub(crate) fn brent<F>(lo: f64, hi: f64, f: F, x_tol: f64, context: &'static str) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut conv = BracketWidth { x_tol, max_iter: 200 };
    find_root_brent(lo, hi, f, &mut conv)
        .map_err(|e| Error::numerical(context, format!("Brent search on [{lo}, {hi}] failed: {e}")))
}

/// Bisection for the boundary between `positive(x) == true` (left) and
/// `false` (right) on `[lo, hi]`.
pub(crate) fn bisect<P>(mut lo: f64, mut hi: f64, mut positive: P, x_tol: f64) -> f64
where
    P: FnMut(f64) -> bool,
{
    while hi - lo > x_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if positive(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
