//! The `solve`, `curve` and `verify` subcommands as plain functions.

use serde::Serialize;

use sale_timing::verify::{
    mc_strategy_value, oracle_threshold_sweep, smooth_pasting_audit, vi_residual_grid, McConfig, McEstimate,
    PastingReport, SweepResult, ViReport,
};
use sale_timing::{solve, OuEigenParams, ProblemSpec, Regime, Solution, Valuation};

use crate::config::{utility_label, CurveMode, Format, GridSpec, RunConfig};
use crate::error::CliError;
use crate::format::{csv_line, format_sig};

/// Fractions of the threshold used for Monte-Carlo checks by default.
pub const DEFAULT_PRICE_FRACTIONS: [f64; 3] = [0.5, 0.7, 0.9];

/// Monte-Carlo agreement bound in standard errors.
pub const MC_SE_MULTIPLE: f64 = 3.0;
/// Bias bound must stay below this many standard errors.
pub const BIAS_SE_MULTIPLE: f64 = 5.0;

fn finite_or_inf(v: Valuation) -> String {
    match v {
        Valuation::Finite(x) => format_sig(x),
        Valuation::Infinite => "inf".into(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub model: &'static str,
    pub utility: &'static str,
    pub strategy: &'static str,
    pub threshold: Option<f64>,
    /// Log of the threshold, reported for the mean-reverting model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_threshold: Option<f64>,
    pub coefficient: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen: Option<OuEigenParams>,
    pub initial_price: f64,
    pub value: Valuation,
    pub certainty_equivalent: Valuation,
    pub premium: Valuation,
    pub problem: ProblemSpec,
}

impl SolveSummary {
    pub fn from_solution(solution: &Solution) -> Result<Self, CliError> {
        let problem = *solution.problem();
        let x0 = problem.initial_price();
        let ce = solution.certainty_equivalent(x0)?;
        let (alpha, eigen, log_threshold) = match solution {
            Solution::Gbm(s) => (Some(s.alpha), None, None),
            Solution::Xou(s) => (None, Some(s.eigen), Some(s.log_threshold())),
        };
        Ok(Self {
            model: problem.model().name(),
            utility: problem.utility().name(),
            strategy: solution.strategy().label(),
            threshold: solution.threshold(),
            log_threshold,
            coefficient: solution.coefficient(),
            alpha,
            eigen,
            initial_price: x0,
            value: solution.value(x0)?,
            certainty_equivalent: ce.ce,
            premium: ce.premium,
            problem,
        })
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => to_json(self),
            Format::Csv => {
                let opt = |v: Option<f64>| v.map(format_sig).unwrap_or_default();
                let mut out = csv_line(&["field".into(), "value".into()]);
                let mut row = |k: &str, v: String| out.push_str(&csv_line(&[k.into(), v]));
                row("model", self.model.into());
                row("utility", self.utility.into());
                row("strategy", self.strategy.into());
                row("threshold", opt(self.threshold));
                if self.log_threshold.is_some() {
                    row("log_threshold", opt(self.log_threshold));
                }
                row("coefficient", opt(self.coefficient));
                if self.alpha.is_some() {
                    row("alpha", opt(self.alpha));
                }
                row("initial_price", format_sig(self.initial_price));
                row("value", finite_or_inf(self.value));
                row("certainty_equivalent", finite_or_inf(self.certainty_equivalent));
                row("premium", finite_or_inf(self.premium));
                out
            }
        }
    }

    pub fn human(&self) -> String {
        let mut s = format!("model: {}\nutility: {}\nstrategy: {}\n", self.model, self.utility, self.strategy);
        if let Some(a) = self.threshold {
            s.push_str(&format!("threshold: {}\n", format_sig(a)));
        }
        if let Some(b) = self.log_threshold {
            s.push_str(&format!("log_threshold: {}\n", format_sig(b)));
        }
        if let Some(c) = self.coefficient {
            s.push_str(&format!("coefficient: {}\n", format_sig(c)));
        }
        if let Some(a) = self.alpha {
            s.push_str(&format!("alpha: {}\n", format_sig(a)));
        }
        s.push_str(&format!(
            "at price {}: value {}, certainty equivalent {}, premium {}\n",
            format_sig(self.initial_price),
            finite_or_inf(self.value),
            finite_or_inf(self.certainty_equivalent),
            finite_or_inf(self.premium)
        ));
        s
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<SolveSummary, CliError> {
    SolveSummary::from_solution(&solve(&cfg.problem)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveMetadata {
    pub problem: ProblemSpec,
    pub strategy: &'static str,
    pub threshold: Option<f64>,
    pub coefficient: Option<f64>,
    /// `"inf"` when waiting forever is optimal; rows are then omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certainty_equivalent: Option<Valuation>,
}

impl CurveMetadata {
    fn new(solution: &Solution) -> Self {
        let infinite = solution.strategy().regime() == Regime::WaitForever;
        Self {
            problem: *solution.problem(),
            strategy: solution.strategy().label(),
            threshold: solution.threshold(),
            coefficient: solution.coefficient(),
            certainty_equivalent: infinite.then_some(Valuation::Infinite),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub price: f64,
    pub utility: f64,
    pub value: f64,
    pub certainty_equivalent: f64,
    pub premium: f64,
}

pub const CURVE_COLUMNS: [&str; 5] = ["price", "utility", "value", "certainty_equivalent", "premium"];

fn curve_row(solution: &Solution, price: f64) -> Result<Option<CurveRow>, CliError> {
    let value = solution.value(price)?;
    let ce = solution.certainty_equivalent(price)?;
    match (value, ce.ce, ce.premium) {
        (Valuation::Finite(v), Valuation::Finite(c), Valuation::Finite(p)) => Ok(Some(CurveRow {
            price,
            utility: solution.problem().payoff(price)?,
            value: v,
            certainty_equivalent: c,
            premium: p,
        })),
        _ => Ok(None),
    }
}

fn curve_cells(row: &CurveRow) -> Vec<String> {
    [row.price, row.utility, row.value, row.certainty_equivalent, row.premium]
        .into_iter()
        .map(format_sig)
        .collect()
}

/// Value, certainty equivalent and premium along a price grid.
#[derive(Debug, Clone, Serialize)]
pub struct CurveTable {
    pub metadata: CurveMetadata,
    pub columns: [&'static str; 5],
    pub rows: Vec<CurveRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceSlice {
    pub nu: f64,
    pub metadata: CurveMetadata,
    pub rows: Vec<CurveRow>,
}

/// Price curves for each quantity of a grid.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceTable {
    pub problem: ProblemSpec,
    pub columns: [&'static str; 6],
    pub slices: Vec<SurfaceSlice>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdCell {
    pub utility: String,
    pub strategy: &'static str,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantityRow {
    pub nu: f64,
    pub cells: Vec<ThresholdCell>,
}

/// Sale thresholds against quantity for a list of utilities.
#[derive(Debug, Clone, Serialize)]
pub struct QuantityTable {
    pub problem: ProblemSpec,
    pub utilities: Vec<String>,
    pub rows: Vec<QuantityRow>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum CurveOutput {
    Price(CurveTable),
    Quantity(QuantityTable),
    Surface(SurfaceTable),
}

impl CurveOutput {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => to_json(self),
            Format::Csv => match self {
                CurveOutput::Price(t) => {
                    let mut out = csv_line(&CURVE_COLUMNS.map(String::from));
                    for row in &t.rows {
                        out.push_str(&csv_line(&curve_cells(row)));
                    }
                    out
                }
                CurveOutput::Surface(t) => {
                    let mut out = csv_line(&t.columns.map(String::from));
                    for slice in &t.slices {
                        for row in &slice.rows {
                            let mut cells = vec![format_sig(slice.nu)];
                            cells.extend(curve_cells(row));
                            out.push_str(&csv_line(&cells));
                        }
                    }
                    out
                }
                CurveOutput::Quantity(t) => {
                    let mut header = vec!["nu".to_string()];
                    header.extend(t.utilities.iter().cloned());
                    let mut out = csv_line(&header);
                    for row in &t.rows {
                        let mut cells = vec![format_sig(row.nu)];
                        cells.extend(
                            row.cells
                                .iter()
                                .map(|c| c.threshold.map(format_sig).unwrap_or_else(|| c.strategy.to_string())),
                        );
                        out.push_str(&csv_line(&cells));
                    }
                    out
                }
            },
        }
    }

    /// Notes for stderr, such as omitted rows.
    pub fn warnings(&self) -> Vec<String> {
        let omitted = |m: &CurveMetadata| m.certainty_equivalent.is_some();
        match self {
            CurveOutput::Price(t) if omitted(&t.metadata) => {
                vec!["waiting forever is optimal; value is infinite and curve rows are omitted".into()]
            }
            CurveOutput::Surface(t) => t
                .slices
                .iter()
                .filter(|s| omitted(&s.metadata))
                .map(|s| format!("nu = {}: value is infinite; rows omitted", format_sig(s.nu)))
                .collect(),
            _ => Vec::new(),
        }
    }
}

fn require_grid(grid: Option<GridSpec>, prefix: &str) -> Result<GridSpec, CliError> {
    grid.ok_or_else(|| CliError::Config(format!("this curve mode needs `{prefix}.min` and `{prefix}.max`")))
}

fn price_curve(problem: &ProblemSpec, prices: &[f64]) -> Result<(CurveMetadata, Vec<CurveRow>), CliError> {
    let solution = solve(problem)?;
    let mut rows = Vec::with_capacity(prices.len());
    for &price in prices {
        if let Some(row) = curve_row(&solution, price)? {
            rows.push(row);
        }
    }
    Ok((CurveMetadata::new(&solution), rows))
}

pub fn cmd_curve(cfg: &RunConfig) -> Result<CurveOutput, CliError> {
    match cfg.curve_mode {
        CurveMode::Price => {
            let prices = require_grid(cfg.grid, "grid")?.values();
            let (metadata, rows) = price_curve(&cfg.problem, &prices)?;
            Ok(CurveOutput::Price(CurveTable {
                metadata,
                columns: CURVE_COLUMNS,
                rows,
            }))
        }
        CurveMode::Surface => {
            let prices = require_grid(cfg.grid, "grid")?.values();
            let mut slices = Vec::new();
            for nu in require_grid(cfg.quantity, "quantity")?.values() {
                let (metadata, rows) = price_curve(&cfg.problem.with_nu(nu)?, &prices)?;
                slices.push(SurfaceSlice { nu, metadata, rows });
            }
            Ok(CurveOutput::Surface(SurfaceTable {
                problem: cfg.problem,
                columns: ["nu", "price", "utility", "value", "certainty_equivalent", "premium"],
                slices,
            }))
        }
        CurveMode::Quantity => {
            let quantities = require_grid(cfg.quantity, "quantity")?.values();
            let mut rows = Vec::with_capacity(quantities.len());
            for nu in quantities {
                let mut cells = Vec::with_capacity(cfg.curve_utilities.len());
                for u in &cfg.curve_utilities {
                    let solution = solve(&cfg.problem.with_nu(nu)?.with_utility(*u)?)?;
                    cells.push(ThresholdCell {
                        utility: utility_label(u),
                        strategy: solution.strategy().label(),
                        threshold: solution.threshold(),
                    });
                }
                rows.push(QuantityRow { nu, cells });
            }
            Ok(CurveOutput::Quantity(QuantityTable {
                problem: cfg.problem,
                utilities: cfg.curve_utilities.iter().map(utility_label).collect(),
                rows,
            }))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct McCheck {
    pub price: f64,
    pub analytic_value: f64,
    pub estimate: McEstimate,
    /// `(mean - analytic) / SE`, 0 when both agree exactly.
    pub z_score: f64,
    pub within_se: bool,
    pub bias_ok: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCheck {
    pub grid: Vec<f64>,
    #[serde(flatten)]
    pub result: SweepResult,
    pub analytic_threshold: Option<f64>,
    /// Largest grid spacing; the argmax must be this close to the analytic
    /// threshold. For waiting-forever problems the means must increase.
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyMetadata {
    pub problem: ProblemSpec,
    pub strategy: &'static str,
    pub threshold: Option<f64>,
    pub coefficient: Option<f64>,
    /// Level used by the simulated strategy.
    pub simulated_threshold: Option<f64>,
    pub mc: McConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub metadata: VerifyMetadata,
    pub pasting: Option<PastingReport>,
    pub vi: ViReport,
    pub monte_carlo: Vec<McCheck>,
    pub sweep: Option<SweepCheck>,
    pub notes: Vec<String>,
    pub passed: bool,
}

fn mc_check(solution: &Solution, threshold: f64, price: f64, mc: &McConfig) -> Result<McCheck, CliError> {
    let problem = solution.problem().with_initial_price(price)?;
    let analytic = solution
        .value(price)?
        .finite()
        .ok_or_else(|| CliError::Config("Monte-Carlo check needs a finite value".into()))?;
    let estimate = mc_strategy_value(&problem, threshold, mc)?;
    let diff = estimate.mean - analytic;
    // exact agreement is required when every path stops at time zero
    let slack = 1e-12 * analytic.abs().max(1.0);
    let within_se = diff.abs() <= MC_SE_MULTIPLE * estimate.std_error + slack;
    let bias_ok = estimate.truncation_bias_bound == 0.0
        || estimate.truncation_bias_bound < BIAS_SE_MULTIPLE * estimate.std_error;
    let z_score = if estimate.std_error > 0.0 { diff / estimate.std_error } else { 0.0 };
    Ok(McCheck {
        price,
        analytic_value: analytic,
        estimate,
        z_score,
        within_se,
        bias_ok,
        passed: within_se && bias_ok,
    })
}

fn sweep_check(solution: &Solution, grid: Vec<f64>, mc: &McConfig) -> Result<SweepCheck, CliError> {
    let result = oracle_threshold_sweep(solution.problem(), &grid, mc)?;
    let tolerance = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let analytic = solution.threshold();
    let passed = match solution.strategy().regime() {
        Regime::Threshold => {
            let a = analytic.expect("threshold regime has a level");
            (result.best_threshold - a).abs() <= tolerance + 1e-12 * a
        }
        Regime::WaitForever => result.table.windows(2).all(|w| w[1].mean > w[0].mean),
        Regime::SellNow => result.best_threshold == grid[0],
    };
    Ok(SweepCheck {
        grid,
        result,
        analytic_threshold: analytic,
        tolerance,
        passed,
    })
}

fn vi_grid(cfg: &RunConfig, solution: &Solution) -> Vec<f64> {
    if let Some(g) = cfg.grid {
        return g.values();
    }
    let anchor = solution.threshold().unwrap_or(cfg.problem.initial_price());
    let n = cfg.verify_vi_points;
    GridSpec {
        min: 0.01 * anchor,
        max: 2.0 * anchor,
        points: n,
        spacing: crate::config::Spacing::Linear,
    }
    .values()
}

pub fn cmd_verify(cfg: &RunConfig, override_threshold: Option<f64>) -> Result<VerifyReport, CliError> {
    if let Some(x) = override_threshold {
        if !(x > 0.0 && x.is_finite()) {
            return Err(CliError::Config(format!("--override-threshold must be positive, got {x}")));
        }
    }
    let solution = solve(&cfg.problem)?;
    let mut notes = Vec::new();
    let regime = solution.strategy().regime();

    let pasting = match regime {
        Regime::Threshold => Some(smooth_pasting_audit(&solution)?),
        _ => {
            notes.push(format!("smooth pasting skipped: {} strategy", solution.strategy().label()));
            None
        }
    };
    let vi = vi_residual_grid(&solution, &vi_grid(cfg, &solution))?;

    let simulated_threshold = override_threshold.or(solution.threshold());
    let mut monte_carlo = Vec::new();
    match (regime, simulated_threshold) {
        (Regime::Threshold, Some(level)) => {
            let analytic = solution.threshold().expect("threshold regime has a level");
            let prices = cfg
                .verify_prices
                .clone()
                .unwrap_or_else(|| DEFAULT_PRICE_FRACTIONS.iter().map(|f| f * analytic).collect());
            for price in prices {
                monte_carlo.push(mc_check(&solution, level, price, &cfg.mc)?);
            }
        }
        _ => notes.push(format!(
            "Monte-Carlo valuation skipped: {} strategy has no finite threshold rule",
            solution.strategy().label()
        )),
    }

    let sweep = match &cfg.sweep {
        Some(spec) => {
            let mut grid = spec.values.clone();
            if spec.include_analytic {
                match solution.threshold() {
                    Some(a) => grid.push(a),
                    None => notes.push("sweep: no analytic threshold to include".into()),
                }
            }
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            if grid.is_empty() {
                return Err(CliError::Config("sweep grid is empty".into()));
            }
            Some(sweep_check(&solution, grid, &cfg.mc)?)
        }
        None => None,
    };

    let passed = pasting.is_none_or(|p| p.passed)
        && vi.passed
        && monte_carlo.iter().all(|c| c.passed)
        && sweep.as_ref().is_none_or(|s| s.passed);
    Ok(VerifyReport {
        metadata: VerifyMetadata {
            problem: cfg.problem,
            strategy: solution.strategy().label(),
            threshold: solution.threshold(),
            coefficient: solution.coefficient(),
            simulated_threshold,
            mc: cfg.mc,
        },
        pasting,
        vi,
        monte_carlo,
        sweep,
        notes,
        passed,
    })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

impl VerifyReport {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => to_json(self),
            Format::Csv => {
                let mut out = csv_line(&["check", "price", "statistic", "reference", "passed"].map(String::from));
                let mut row = |check: &str, price: Option<f64>, stat: f64, reference: f64, ok: bool| {
                    out.push_str(&csv_line(&[
                        check.to_string(),
                        price.map(format_sig).unwrap_or_default(),
                        format_sig(stat),
                        format_sig(reference),
                        ok.to_string(),
                    ]))
                };
                if let Some(p) = &self.pasting {
                    row("pasting_value_gap", Some(p.threshold), p.value_gap, p.tolerance, p.passed);
                    row("pasting_derivative_gap", Some(p.threshold), p.derivative_gap, p.tolerance, p.passed);
                }
                row("vi_max_violation", None, self.vi.max_violation, self.vi.tolerance, self.vi.passed);
                for c in &self.monte_carlo {
                    row("mc_mean", Some(c.price), c.estimate.mean, c.analytic_value, c.passed);
                }
                if let Some(s) = &self.sweep {
                    row(
                        "sweep_best",
                        None,
                        s.result.best_threshold,
                        s.analytic_threshold.unwrap_or(f64::INFINITY),
                        s.passed,
                    );
                }
                out
            }
        }
    }

    pub fn human(&self) -> String {
        let mut s = String::new();
        if let Some(p) = &self.pasting {
            s.push_str(&format!(
                "{} smooth pasting at {}: value gap {:.2e}, derivative gap {:.2e}\n",
                verdict(p.passed),
                format_sig(p.threshold),
                p.value_gap,
                p.derivative_gap
            ));
        }
        s.push_str(&format!(
            "{} variational inequality on {} points: max violation {:.2e}\n",
            verdict(self.vi.passed),
            self.vi.points.len(),
            self.vi.max_violation
        ));
        for c in &self.monte_carlo {
            s.push_str(&format!(
                "{} Monte-Carlo at price {}: mean {} vs analytic {} (z = {:.2}, SE {:.2e}, bias bound {:.2e})\n",
                verdict(c.passed),
                format_sig(c.price),
                format_sig(c.estimate.mean),
                format_sig(c.analytic_value),
                c.z_score,
                c.estimate.std_error,
                c.estimate.truncation_bias_bound
            ));
        }
        if let Some(sw) = &self.sweep {
            s.push_str(&format!(
                "{} threshold sweep: best {} over {} candidates\n",
                verdict(sw.passed),
                format_sig(sw.result.best_threshold),
                sw.grid.len()
            ));
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s.push_str(&format!("overall: {}\n", verdict(self.passed)));
        s
    }
}
