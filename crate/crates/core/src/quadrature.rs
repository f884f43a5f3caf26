//! Globally adaptive 21-point Gauss-Kronrod quadrature on finite intervals.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Tolerances for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    /// Absolute floor under which the error estimate is always accepted.
    pub abs_tol: f64,
    /// Maximum number of bisections applied to any one subinterval.
    pub max_refinements: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_refinements: 30,
        }
    }
}

impl QuadratureConfig {
    pub fn new(rel_tol: f64, abs_tol: f64, max_refinements: u32) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Error::validation("quadrature.rel_tol", "must lie in (0, 1)"));
        }
        if !(abs_tol >= 0.0) {
            return Err(Error::validation("quadrature.abs_tol", "must be >= 0"));
        }
        Ok(Self {
            rel_tol,
            abs_tol,
            max_refinements,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

// Abscissae and weights of the 21-point Kronrod rule and its embedded
// 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_460,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_958_109_831,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Estimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut result_k = fc * WGK[10];
    let mut result_g = 0.0;
    let mut result_abs = result_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        result_k += WGK[j] * (f1 + f2);
        result_abs += WGK[j] * (f1.abs() + f2.abs());
        // Gauss nodes are the odd-indexed Kronrod nodes.
        if j % 2 == 1 {
            result_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * result_k;
    let mut result_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        result_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = result_k * half;
    let result_abs = result_abs * half.abs();
    let result_asc = result_asc * half.abs();
    let mut error = ((result_k - result_g) * half).abs();
    if result_asc != 0.0 && error != 0.0 {
        error = result_asc * (200.0 * error / result_asc).powf(1.5).min(1.0);
    }
    if result_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * result_abs);
    }
    Estimate { value, error }
}

struct Piece {
    a: f64,
    b: f64,
    depth: u32,
    est: Estimate,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// Integrate `f` over `[a, b]`, bisecting the subinterval with the largest
/// error estimate until the summed estimate meets the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let first = kronrod21(&f, a, b);
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, depth: 0, est: first });
    loop {
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::numerical("quadrature", format!("non-finite estimate on [{a}, {b}]")));
        }
        let tolerance = cfg.abs_tol.max(cfg.rel_tol * value.abs());
        if error <= tolerance {
            return Ok(Estimate { value, error });
        }
        let worst = heap.pop().expect("heap holds at least one piece");
        if worst.depth >= cfg.max_refinements {
            return Err(Error::Quadrature { estimate: error, tolerance });
        }
        let mid = 0.5 * (worst.a + worst.b);
        let left = kronrod21(&f, worst.a, mid);
        let right = kronrod21(&f, mid, worst.b);
        value += left.value + right.value - worst.est.value;
        error += left.error + right.error - worst.est.error;
        heap.push(Piece { a: worst.a, b: mid, depth: worst.depth + 1, est: left });
        heap.push(Piece { a: mid, b: worst.b, depth: worst.depth + 1, est: right });
        // Running sums drift; re-add from scratch every so often.
        if heap.len() % 64 == 0 {
            value = heap.iter().map(|p| p.est.value).sum();
            error = heap.iter().map(|p| p.est.error).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let cfg = QuadratureConfig::default();
        let est = integrate(|x| 3.0 * x * x + 1.0, 0.0, 2.0, &cfg).unwrap();
        assert!((est.value - 10.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_tail() {
        let cfg = QuadratureConfig::default();
        let est = integrate(|x: f64| (-0.5 * x * x).exp(), 0.0, 40.0, &cfg).unwrap();
        let expected = (std::f64::consts::PI / 2.0).sqrt();
        assert!((est.value - expected).abs() < 1e-13);
    }

    #[test]
    fn sharp_transition_converges() {
        let cfg = QuadratureConfig::default();
        // exp(-1000 t^30) drops from 1 to 0 around t = 0.79
        let est = integrate(|t: f64| (-1000.0 * t.powi(30)).exp(), 0.0, 1.0, &cfg).unwrap();
        let reference = integrate(|t: f64| (-1000.0 * t.powi(30)).exp(), 0.0, 0.5, &cfg).unwrap().value
            + integrate(|t: f64| (-1000.0 * t.powi(30)).exp(), 0.5, 1.0, &cfg).unwrap().value;
        assert!((est.value - reference).abs() < 1e-11);
    }

    #[test]
    fn non_convergence_reports_estimate() {
        let cfg = QuadratureConfig::new(1e-12, 0.0, 2).unwrap();
        let err = integrate(|x: f64| x.sqrt().recip(), 0.0, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::Quadrature { estimate, .. } if estimate > 0.0));
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(QuadratureConfig::new(0.0, 0.0, 10).is_err());
        assert!(QuadratureConfig::new(1.0, 0.0, 10).is_err());
    }
}
