//! Monte-Carlo valuation of threshold strategies.
//!
//! Transitions are exact in law: the GBM log-price is an arithmetic Brownian
//! motion and the OU log-price has Gaussian transitions. The only biases are
//! discrete monitoring, which stops later than the continuous rule, and the
//! finite horizon, which is bounded and reported.
//!
//! Path `i` draws its normals from a `Xoshiro256PlusPlus` generator seeded
//! with the `i`-th output of `SplitMix64(seed)`. Paths therefore own their
//! streams: estimates do not depend on how paths are split across threads,
//! and every candidate threshold or starting price sees the same paths.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ProblemSpec};

/// Trading days per year; the default time step is one day.
pub const DEFAULT_DT: f64 = 1.0 / 252.0;

/// Discount factor at the default horizon.
pub const HORIZON_DISCOUNT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    /// Monitoring interval.
    pub dt: f64,
    /// Truncation time.
    pub horizon: f64,
    pub seed: u64,
    /// Exact transitions per monitoring interval.
    pub substeps: usize,
}

impl McConfig {
    pub fn new(n_paths: usize, dt: f64, horizon: f64, seed: u64) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::validation("mc.paths", "must be at least 1"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation("mc.dt", format!("must be positive and finite, got {dt}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::validation("mc.horizon", format!("must be positive and finite, got {horizon}")));
        }
        Ok(Self {
            n_paths,
            dt,
            horizon,
            seed,
            substeps: 1,
        })
    }

    /// Daily monitoring and the smallest whole-year horizon with
    /// `e^{-r T} <= 1e-4`.
    pub fn for_rate(r: f64, n_paths: usize, seed: u64) -> Result<Self> {
        Self::new(n_paths, DEFAULT_DT, default_horizon(r), seed)
    }

    /// Split each monitoring interval into `k` exact transitions.
    ///
    /// `dt / 2` with `k = 1` and `dt` with `k = 2` then share every normal
    /// draw and differ only in how often the threshold is checked.
    pub fn with_substeps(mut self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::validation("mc.substeps", "must be at least 1"));
        }
        self.substeps = k;
        Ok(self)
    }

    fn monitoring_steps(&self) -> usize {
        (self.horizon / self.dt).ceil() as usize
    }
}

pub fn default_horizon(r: f64) -> f64 {
    (-HORIZON_DISCOUNT.ln() / r).ceil()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub threshold: f64,
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    /// `e^{-rT}` times the sample mean over unstopped paths of
    /// `max(|U(nu S_T)|, |U(nu a)|)`.
    pub truncation_bias_bound: f64,
    /// Fraction of paths that reached the threshold before the horizon.
    pub stopped_fraction: f64,
}

impl McEstimate {
    /// `|mean - target| <= k * SE`.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

/// Log-price dynamics on one exact transition of length `h`.
#[derive(Debug, Clone, Copy)]
enum Transition {
    /// `y += shift + vol N`.
    Gbm { shift: f64, vol: f64 },
    /// `y = theta + (y - theta) decay + vol N`.
    Ou { theta: f64, decay: f64, vol: f64 },
}

impl Transition {
    fn new(model: &Model, h: f64) -> Self {
        match *model {
            Model::Gbm(g) => Transition::Gbm {
                shift: (g.mu - 0.5 * g.sigma * g.sigma) * h,
                vol: g.sigma * h.sqrt(),
            },
            Model::Xou(x) => Transition::Ou {
                theta: x.theta,
                decay: (-x.kappa * h).exp(),
                vol: x.eta * (-(-2.0 * x.kappa * h).exp_m1() / (2.0 * x.kappa)).sqrt(),
            },
        }
    }

}

/// Outcome of one path against one candidate threshold.
#[derive(Debug, Clone, Copy)]
struct Crossing {
    /// Discounted payoff, or 0 when unstopped.
    discounted: f64,
    /// Tail magnitude for the bias bound, 0 when stopped.
    tail: f64,
    stopped: bool,
}

/// Golden-ratio increment of SplitMix64.
const SPLITMIX_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Generator of path `index`: seeded by output `index` of `SplitMix64(seed)`,
/// computed directly from the SplitMix64 state at that position.
fn path_rng(seed: u64, index: usize) -> Xoshiro256PlusPlus {
    let mut splitter = SplitMix64::seed_from_u64(seed.wrapping_add((index as u64).wrapping_mul(SPLITMIX_GAMMA)));
    Xoshiro256PlusPlus::seed_from_u64(splitter.next_u64())
}

/// Step until `y >= level` or `max_steps` monitoring times have passed.
/// Returns the number of monitoring steps taken and the final state.
#[inline(always)]
fn advance<F>(rng: &mut Xoshiro256PlusPlus, mut y: f64, level: f64, max_steps: usize, substeps: usize, step: F) -> (usize, f64)
where
    F: Fn(f64, f64) -> f64,
{
    let mut k = 0;
    if substeps == 1 {
        while k < max_steps {
            let n: f64 = StandardNormal.sample(rng);
            y = step(y, n);
            k += 1;
            if y >= level {
                break;
            }
        }
    } else {
        while k < max_steps {
            for _ in 0..substeps {
                let n: f64 = StandardNormal.sample(rng);
                y = step(y, n);
            }
            k += 1;
            if y >= level {
                break;
            }
        }
    }
    (k, y)
}

/// Simulate one path against increasing thresholds `log_levels`.
fn simulate_path(
    problem: &ProblemSpec,
    cfg: &McConfig,
    transition: &Transition,
    levels: &[f64],
    log_levels: &[f64],
    index: usize,
) -> Result<Vec<Crossing>> {
    let mut rng = path_rng(cfg.seed, index);
    let r = problem.r();
    let s0 = problem.initial_price();
    let mut out = Vec::with_capacity(levels.len());

    let mut y = s0.ln();
    let mut next = 0;
    while next < levels.len() && y >= log_levels[next] {
        out.push(Crossing {
            discounted: problem.payoff(s0)?,
            tail: 0.0,
            stopped: true,
        });
        next += 1;
    }
    let steps = cfg.monitoring_steps();
    let mut k = 0;
    while next < levels.len() && k < steps {
        let (crossed_at, y_end) = match *transition {
            Transition::Gbm { shift, vol } => {
                advance(&mut rng, y, log_levels[next], steps - k, cfg.substeps, |y, n| y + shift + vol * n)
            }
            Transition::Ou { theta, decay, vol } => advance(
                &mut rng,
                y,
                log_levels[next],
                steps - k,
                cfg.substeps,
                |y, n| theta + (y - theta) * decay + vol * n,
            ),
        };
        k += crossed_at;
        y = y_end;
        if y >= log_levels[next] {
            let t = k as f64 * cfg.dt;
            let discounted = (-r * t).exp() * problem.payoff(y.exp())?;
            while next < levels.len() && y >= log_levels[next] {
                out.push(Crossing {
                    discounted,
                    tail: 0.0,
                    stopped: true,
                });
                next += 1;
            }
        }
    }
    if next < levels.len() {
        let end = problem.payoff(y.exp())?.abs();
        for &level in &levels[next..] {
            out.push(Crossing {
                discounted: 0.0,
                tail: end.max(problem.payoff(level)?.abs()),
                stopped: false,
            });
        }
    }
    Ok(out)
}

fn check_thresholds(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Usage("threshold grid is empty".into()));
    }
    if grid.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::Usage("thresholds must be positive and finite".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage("threshold grid must be strictly increasing".into()));
    }
    Ok(())
}

/// One estimate per threshold of `grid`, all from the same paths.
fn simulate(problem: &ProblemSpec, grid: &[f64], cfg: &McConfig) -> Result<Vec<McEstimate>> {
    check_thresholds(grid)?;
    let transition = Transition::new(problem.model(), cfg.dt / cfg.substeps as f64);
    let log_levels: Vec<f64> = grid.iter().map(|a| a.ln()).collect();
    let paths: Vec<Vec<Crossing>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| simulate_path(problem, cfg, &transition, grid, &log_levels, i))
        .collect::<Result<_>>()?;

    let n = cfg.n_paths as f64;
    let horizon_discount = (-problem.r() * cfg.monitoring_steps() as f64 * cfg.dt).exp();
    Ok(grid
        .iter()
        .enumerate()
        .map(|(j, &threshold)| {
            // shifted by the first sample so constant samples average exactly
            let first = paths[0][j].discounted;
            let mean = first + paths.iter().map(|p| p[j].discounted - first).sum::<f64>() / n;
            let std_error = if cfg.n_paths > 1 {
                let ss: f64 = paths.iter().map(|p| (p[j].discounted - mean).powi(2)).sum();
                (ss / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            let tail = paths.iter().map(|p| p[j].tail).sum::<f64>() / n;
            let stopped = paths.iter().filter(|p| p[j].stopped).count() as f64 / n;
            McEstimate {
                threshold,
                mean,
                std_error,
                n: cfg.n_paths,
                truncation_bias_bound: horizon_discount * tail,
                stopped_fraction: stopped,
            }
        })
        .collect())
}

/// Expected discounted utility of selling the first time the monitored
/// price reaches `threshold`, starting from the problem's initial price.
pub fn mc_strategy_value(problem: &ProblemSpec, threshold: f64, cfg: &McConfig) -> Result<McEstimate> {
    Ok(simulate(problem, &[threshold], cfg)?.remove(0))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub best_threshold: f64,
    pub table: Vec<McEstimate>,
}

/// Brute-force threshold search with common random numbers.
///
/// Returns the candidate with the largest mean; ties go to the smaller
/// threshold. Each row equals `mc_strategy_value` at that threshold.
pub fn oracle_threshold_sweep(problem: &ProblemSpec, grid: &[f64], cfg: &McConfig) -> Result<SweepResult> {
    let table = simulate(problem, grid, cfg)?;
    let mut best = 0;
    for (j, row) in table.iter().enumerate() {
        if row.mean > table[best].mean {
            best = j;
        }
    }
    Ok(SweepResult {
        best_threshold: table[best].threshold,
        table,
    })
}
