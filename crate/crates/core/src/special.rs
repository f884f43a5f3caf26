//! Increasing and decreasing eigenfunctions of the OU generator.
//!
//! For `dZ = kappa (theta - Z) dt + eta dB` and discount rate `r`, the
//! positive solutions of `(eta^2/2) f'' + kappa (theta - z) f' = r f` are
//!
//! ```text
//! F(z) = int_0^inf u^(r/kappa - 1) exp( c (z - theta) u - u^2/2 ) du
//! G(z) = int_0^inf u^(r/kappa - 1) exp( c (theta - z) u - u^2/2 ) du
//! ```
//!
//! with `c = sqrt(2 kappa) / eta`. Up to a Gamma-function factor these are
//! parabolic cylinder functions, but every value here comes from quadrature
//! of the integrals themselves. Derivatives are taken under the integral
//! sign, so `F^(k)` is the same integral with an extra `(c u)^k`.
//!
//! The integral is split at `u = 1`. On `(0, 1)` the substitution
//! `u = t^(kappa/r)` removes the power singularity; on `(1, inf)` the range
//! is truncated once the integrand has fallen far below its peak. Both parts
//! are accumulated relative to their peak exponent, so logarithms stay finite
//! long after the values themselves would overflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::XouParams;
use crate::quadrature::{integrate, QuadratureConfig};

/// OU parameters together with the discount rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuEigenParams {
    pub kappa: f64,
    pub theta: f64,
    pub eta: f64,
    pub r: f64,
}

impl OuEigenParams {
    pub fn new(xou: &XouParams, r: f64) -> Result<Self> {
        let params = Self {
            kappa: xou.kappa,
            theta: xou.theta,
            eta: xou.eta,
            r,
        };
        XouParams::new(params.kappa, params.theta, params.eta)?;
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::validation("r", "discount rate must be finite and > 0"));
        }
        Ok(params)
    }

    /// `sqrt(2 kappa / eta^2)`.
    pub fn scale(&self) -> f64 {
        (2.0 * self.kappa).sqrt() / self.eta
    }

    /// `r / kappa`.
    pub fn exponent(&self) -> f64 {
        self.r / self.kappa
    }

    /// `(L - r) f` at `z` given `f`, `f'`, `f''`.
    pub fn generator_residual(&self, z: f64, f: f64, df: f64, d2f: f64) -> f64 {
        0.5 * self.eta * self.eta * d2f + self.kappa * (self.theta - z) * df - self.r * f
    }

    /// Sum of absolute generator terms, the natural scale for the residual.
    pub fn generator_scale(&self, z: f64, f: f64, df: f64, d2f: f64) -> f64 {
        (0.5 * self.eta * self.eta * d2f).abs() + (self.kappa * (self.theta - z) * df).abs() + (self.r * f).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `F`, strictly increasing.
    Increasing,
    /// `G`, strictly decreasing.
    Decreasing,
}

/// Evaluator for `F`, `G` and their first two derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Eigenfunctions {
    params: OuEigenParams,
    cfg: QuadratureConfig,
}

impl Eigenfunctions {
    pub fn new(params: OuEigenParams) -> Self {
        Self::with_config(params, QuadratureConfig::default())
    }

    pub fn with_config(params: OuEigenParams, cfg: QuadratureConfig) -> Self {
        Self { params, cfg }
    }

    pub fn params(&self) -> &OuEigenParams {
        &self.params
    }

    /// `ln |d^k/dz^k B(z)|` for branch `B`.
    pub fn ln_abs(&self, branch: Branch, z: f64, order: u8) -> Result<f64> {
        check_order(order)?;
        if !z.is_finite() {
            return Err(Error::Domain(format!("eigenfunction argument must be finite, got {z}")));
        }
        let c = self.params.scale();
        let y = match branch {
            Branch::Increasing => c * (z - self.params.theta),
            Branch::Decreasing => c * (self.params.theta - z),
        };
        let ln_integral = ln_moment(y, self.params.exponent(), order, &self.cfg)?;
        Ok(ln_integral + f64::from(order) * c.ln())
    }

    /// Signed value of `d^k/dz^k B(z)`.
    pub fn eval(&self, branch: Branch, z: f64, order: u8) -> Result<f64> {
        let ln = self.ln_abs(branch, z, order)?;
        if ln > f64::MAX.ln() {
            return Err(Error::numerical(
                "eigenfunction",
                format!("value at z = {z} overflows (log magnitude {ln:.1})"),
            ));
        }
        let sign = match branch {
            Branch::Decreasing if order % 2 == 1 => -1.0,
            _ => 1.0,
        };
        Ok(sign * ln.exp())
    }

    pub fn f(&self, z: f64, order: u8) -> Result<f64> {
        self.eval(Branch::Increasing, z, order)
    }

    pub fn g(&self, z: f64, order: u8) -> Result<f64> {
        self.eval(Branch::Decreasing, z, order)
    }

    /// `F'(z) / F(z)`, finite even where `F` itself overflows.
    pub fn f_log_derivative(&self, z: f64) -> Result<f64> {
        Ok((self.ln_abs(Branch::Increasing, z, 1)? - self.ln_abs(Branch::Increasing, z, 0)?).exp())
    }
}

/// `F^(order)(z)` with the default quadrature configuration.
pub fn eval_f(params: &OuEigenParams, z: f64, order: u8) -> Result<f64> {
    Eigenfunctions::new(*params).f(z, order)
}

/// `G^(order)(z)` with the default quadrature configuration.
pub fn eval_g(params: &OuEigenParams, z: f64, order: u8) -> Result<f64> {
    Eigenfunctions::new(*params).g(z, order)
}

fn check_order(order: u8) -> Result<()> {
    if order > 2 {
        return Err(Error::Usage(format!("derivative order must be 0, 1 or 2, got {order}")));
    }
    Ok(())
}

/// `ln int_0^inf u^(a - 1 + k) exp(y u - u^2/2) du`.
fn ln_moment(y: f64, a: f64, k: u8, cfg: &QuadratureConfig) -> Result<f64> {
    let k = f64::from(k);
    let power = a - 1.0 + k;

    // (0, 1) with u = t^(1/a): u^(a-1) du = dt / a, leaving t^(k/a) phi(t^(1/a)).
    let peak_low = if y <= 0.0 {
        0.0
    } else if y >= 1.0 {
        y - 0.5
    } else {
        0.5 * y * y
    };
    let inv_a = 1.0 / a;
    let low = integrate(
        |t: f64| {
            if t <= 0.0 {
                return if k == 0.0 { (-peak_low).exp() } else { 0.0 };
            }
            let ln_t = t.ln();
            let u = (ln_t * inv_a).exp();
            (k * inv_a * ln_t + y * u - 0.5 * u * u - peak_low).exp()
        },
        0.0,
        1.0,
        cfg,
    )?;
    let ln_low = peak_low + low.value.ln() - a.ln();

    // (1, inf), truncated where the integrand drops below rel_tol * 1e-3 of its peak.
    let log_integrand = |u: f64| power * u.ln() + y * u - 0.5 * u * u;
    let disc = y * y + 4.0 * power;
    let mode = if disc >= 0.0 { 0.5 * (y + disc.sqrt()) } else { 0.0 };
    let peak_at = mode.max(1.0);
    let peak_high = log_integrand(peak_at);
    let cut = peak_high + (cfg.rel_tol * 1e-3).ln();
    let mut width = 1.0;
    while log_integrand(peak_at + width) > cut {
        width *= 2.0;
    }
    let upper = peak_at + width;
    let scaled = |u: f64| (log_integrand(u) - peak_high).exp();
    let mut high = integrate(scaled, peak_at, upper, cfg)?.value;
    if peak_at > 1.0 {
        high += integrate(scaled, 1.0, peak_at, cfg)?.value;
    }
    let ln_high = peak_high + high.ln();

    let m = ln_low.max(ln_high);
    let total = m + ((ln_low - m).exp() + (ln_high - m).exp()).ln();
    if !total.is_finite() {
        return Err(Error::numerical("eigenfunction", format!("non-finite integral at y = {y}")));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig3() -> OuEigenParams {
        OuEigenParams::new(&XouParams::new(0.6, 1.0, 0.2).unwrap(), 0.02).unwrap()
    }

    fn grid(p: &OuEigenParams, n: usize) -> Vec<f64> {
        let half = 6.0 * p.eta / (2.0 * p.kappa).sqrt();
        (0..n)
            .map(|i| p.theta - half + 2.0 * half * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn value_at_theta_matches_gamma_identity() {
        // int_0^inf u^(a-1) e^(-u^2/2) du = 2^(a/2 - 1) Gamma(a/2)
        let p = fig3();
        let a = p.exponent();
        let expected = 2f64.powf(a / 2.0 - 1.0) * libm::tgamma(a / 2.0);
        let got = eval_f(&p, p.theta, 0).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-11, "{got} vs {expected}");
        // value pinned from the Gamma-function oracle
        assert!((expected - 30.064_834_575_370_5).abs() < 1e-9);
    }

    #[test]
    fn f_and_g_coincide_at_theta() {
        let p = fig3();
        assert_eq!(eval_f(&p, p.theta, 0).unwrap(), eval_g(&p, p.theta, 0).unwrap());
    }

    #[test]
    fn reflection_symmetry() {
        let p = fig3();
        for z in grid(&p, 13) {
            let g = eval_g(&p, z, 0).unwrap();
            let f = eval_f(&p, 2.0 * p.theta - z, 0).unwrap();
            assert!(((g - f) / f).abs() < 1e-14);
        }
    }

    #[test]
    fn positive_monotone_convex_on_grid() {
        let p = fig3();
        let e = Eigenfunctions::new(p);
        for z in grid(&p, 41) {
            assert!(e.f(z, 0).unwrap() > 0.0 && e.g(z, 0).unwrap() > 0.0);
            assert!(e.f(z, 1).unwrap() > 0.0 && e.g(z, 1).unwrap() < 0.0);
            assert!(e.f(z, 2).unwrap() > 0.0 && e.g(z, 2).unwrap() > 0.0);
        }
    }

    #[test]
    fn wronskian_positive() {
        let p = fig3();
        let e = Eigenfunctions::new(p);
        for z in [p.theta - 1.0, p.theta, p.theta + 1.0] {
            let w = e.f(z, 1).unwrap() * e.g(z, 0).unwrap() - e.f(z, 0).unwrap() * e.g(z, 1).unwrap();
            assert!(w > 0.0);
        }
    }

    #[test]
    fn ode_residual_vanishes() {
        for p in [fig3(), OuEigenParams::new(&XouParams::new(2.0, -0.5, 0.7).unwrap(), 3.0).unwrap()] {
            let e = Eigenfunctions::new(p);
            for z in (0..=24).map(|i| p.theta - 3.0 + 0.25 * i as f64) {
                for branch in [Branch::Increasing, Branch::Decreasing] {
                    let v: Vec<f64> = (0..3).map(|k| e.eval(branch, z, k).unwrap()).collect();
                    let res = p.generator_residual(z, v[0], v[1], v[2]);
                    let scale = p.generator_scale(z, v[0], v[1], v[2]);
                    assert!((res / scale).abs() < 1e-8, "{branch:?} z={z} rel={}", res / scale);
                }
            }
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let p = fig3();
        let e = Eigenfunctions::new(p);
        // fourth-order stencils; quadrature noise near 1e-14 limits h from below
        let h = 2e-3;
        for z in grid(&p, 17) {
            for branch in [Branch::Increasing, Branch::Decreasing] {
                let f = |z| e.eval(branch, z, 0).unwrap();
                let (m2, m1, p1, p2) = (f(z - 2.0 * h), f(z - h), f(z + h), f(z + 2.0 * h));
                let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
                let d2 = (-m2 + 16.0 * m1 - 30.0 * f(z) + 16.0 * p1 - p2) / (12.0 * h * h);
                let a1 = e.eval(branch, z, 1).unwrap();
                let a2 = e.eval(branch, z, 2).unwrap();
                assert!(((d1 - a1) / a1).abs() < 1e-6, "{branch:?} z={z}");
                assert!(((d2 - a2) / a2).abs() < 1e-6, "{branch:?} z={z}: {d2} vs {a2}");
            }
        }
    }

    #[test]
    fn log_space_survives_overflow() {
        let p = fig3();
        let e = Eigenfunctions::new(p);
        // c (z - theta) = 50 puts the peak exponent near 1250
        let z = p.theta + 50.0 / p.scale();
        let ln = e.ln_abs(Branch::Increasing, z, 0).unwrap();
        assert!(ln > 1200.0 && ln.is_finite());
        assert!(e.f(z, 0).is_err());
        let ratio = e.f_log_derivative(z).unwrap();
        // F'/F -> c * y for large y
        assert!((ratio / (p.scale() * 50.0) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn rejects_order_above_two() {
        assert!(matches!(eval_f(&fig3(), 0.0, 3), Err(Error::Usage(_))));
    }

    #[test]
    fn large_exponent_without_singularity() {
        // r / kappa = 5: integrand vanishes at 0, substitution still valid
        let p = OuEigenParams::new(&XouParams::new(0.2, 0.0, 0.3).unwrap(), 1.0).unwrap();
        let a = p.exponent();
        let expected = 2f64.powf(a / 2.0 - 1.0) * libm::tgamma(a / 2.0);
        let got = eval_f(&p, 0.0, 0).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-11);
    }
}
