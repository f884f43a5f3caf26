//! Run configuration: a flat map of dotted keys from a TOML file plus
//! command-line overrides, resolved into typed settings.
//!
//! Every key in the file must be consumed by the resolver; leftovers are
//! reported as unknown so typos never pass silently.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use sale_timing::verify::{default_horizon, McConfig, DEFAULT_DT};
use sale_timing::{GbmParams, Model, ProblemSpec, Utility, XouParams};
use toml::Value;

use crate::error::CliError;

/// Dotted key to value, after overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatConfig {
    entries: BTreeMap<String, Value>,
}

fn flatten_into(prefix: &str, table: toml::Table, out: &mut BTreeMap<String, Value>) {
    for (key, value) in table {
        let full = if prefix.is_empty() { key } else { format!("{prefix}.{key}") };
        match value {
            Value::Table(inner) => flatten_into(&full, inner, out),
            other => {
                out.insert(full, other);
            }
        }
    }
}

/// Parse a command-line value as a TOML scalar or array, falling back to a
/// bare string (so `--model.kind xou` works without quotes).
pub fn parse_override_value(raw: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        let mut entries = BTreeMap::new();
        flatten_into("", table, &mut entries);
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.entries.insert(key.to_string(), value);
    }

    /// Apply a `key=value` override.
    pub fn set_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not of the form key=value")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(CliError::Config(format!("override `{assignment}` has an empty key")));
        }
        self.set(key, parse_override_value(raw.trim()));
        Ok(())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Typed reads that remember which keys were used.
struct Reader<'a> {
    cfg: &'a FlatConfig,
    used: RefCell<BTreeSet<String>>,
}

fn type_error(key: &str, expected: &str, got: &Value) -> CliError {
    CliError::Config(format!("config key `{key}`: expected {expected}, got {}", got.type_str()))
}

impl<'a> Reader<'a> {
    fn new(cfg: &'a FlatConfig) -> Self {
        Self {
            cfg,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    fn raw(&self, key: &str) -> Option<&'a Value> {
        let v = self.cfg.entries.get(key);
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(v) => Err(type_error(key, "a number", v)),
        }
    }

    fn f64_req(&self, key: &str) -> Result<f64, CliError> {
        self.f64_opt(key)?
            .ok_or_else(|| CliError::Config(format!("missing required config key `{key}`")))
    }

    fn u64_opt(&self, key: &str) -> Result<Option<u64>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(v) => Err(type_error(key, "a non-negative integer", v)),
        }
    }

    fn str_opt(&self, key: &str) -> Result<Option<&'a str>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(v) => Err(type_error(key, "a string", v)),
        }
    }

    fn bool_opt(&self, key: &str) -> Result<Option<bool>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(v) => Err(type_error(key, "a boolean", v)),
        }
    }

    fn f64_list_opt(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    other => Err(type_error(key, "an array of numbers", other)),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(v) => Err(type_error(key, "an array of numbers", v)),
        }
    }

    fn str_list_opt(&self, key: &str) -> Result<Option<Vec<String>>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    other => Err(type_error(key, "an array of strings", other)),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(v) => Err(type_error(key, "an array of strings", v)),
        }
    }

    fn finish(self) -> Result<(), CliError> {
        let used = self.used.into_inner();
        let unknown: Vec<&str> = self.cfg.keys().filter(|k| !used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!(
                "unknown or inapplicable config key(s): {}",
                unknown.iter().map(|k| format!("`{k}`")).collect::<Vec<_>>().join(", ")
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    return self.max;
                }
                let t = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.min + (self.max - self.min) * t,
                    Spacing::Log => (self.min.ln() + (self.max.ln() - self.min.ln()) * t).exp(),
                }
            })
            .collect()
    }
}

fn read_grid(r: &Reader, prefix: &str) -> Result<Option<GridSpec>, CliError> {
    let key = |k: &str| format!("{prefix}.{k}");
    let min = r.f64_opt(&key("min"))?;
    let max = r.f64_opt(&key("max"))?;
    let points = r.u64_opt(&key("points"))?;
    let spacing = r.str_opt(&key("spacing"))?;
    if min.is_none() && max.is_none() && points.is_none() && spacing.is_none() {
        return Ok(None);
    }
    let (Some(min), Some(max)) = (min, max) else {
        return Err(CliError::Config(format!("`{}` and `{}` must both be set", key("min"), key("max"))));
    };
    let points = points.unwrap_or(50) as usize;
    let spacing = match spacing.unwrap_or("linear") {
        "linear" => Spacing::Linear,
        "log" => Spacing::Log,
        other => {
            return Err(CliError::Config(format!(
                "config key `{}`: expected \"linear\" or \"log\", got \"{other}\"",
                key("spacing")
            )))
        }
    };
    if !(min.is_finite() && max.is_finite() && min < max) {
        return Err(CliError::Config(format!("config key `{}`: need min < max", key("min"))));
    }
    if points < 2 {
        return Err(CliError::Config(format!("config key `{}`: need at least 2 points", key("points"))));
    }
    if spacing == Spacing::Log && min <= 0.0 {
        return Err(CliError::Config(format!("config key `{}`: log spacing needs min > 0", key("min"))));
    }
    Ok(Some(GridSpec {
        min,
        max,
        points,
        spacing,
    }))
}

/// Parse `exponential:<gamma>`, `log` or `power:<p>`.
pub fn parse_utility_label(label: &str) -> Result<Utility, CliError> {
    let bad = || CliError::Config(format!("cannot parse utility `{label}`; use exponential:<gamma>, log or power:<p>"));
    let (kind, param) = match label.split_once(':') {
        Some((k, p)) => (k.trim(), Some(p.trim().parse::<f64>().map_err(|_| bad())?)),
        None => (label.trim(), None),
    };
    let utility = match (kind, param) {
        ("exponential", Some(g)) => Utility::exponential(g),
        ("log", None) => Ok(Utility::Log),
        ("power", Some(p)) => Utility::power(p),
        _ => return Err(bad()),
    };
    utility.map_err(|e| CliError::Config(format!("utility `{label}`: {e}")))
}

/// Column label of a utility in quantity sweeps.
pub fn utility_label(u: &Utility) -> String {
    match u {
        Utility::Exponential { gamma } => format!("exponential:{gamma}"),
        Utility::Log => "log".to_string(),
        Utility::Power { p } => format!("power:{p}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMode {
    Price,
    Quantity,
    Surface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::Config(format!(
                "config key `output.format`: expected \"csv\" or \"json\", got \"{other}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub values: Vec<f64>,
    pub include_analytic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub grid: Option<GridSpec>,
    pub quantity: Option<GridSpec>,
    pub curve_mode: CurveMode,
    pub curve_utilities: Vec<Utility>,
    pub mc: McConfig,
    /// Prices for Monte-Carlo checks; `None` means fractions of the threshold.
    pub verify_prices: Option<Vec<f64>>,
    pub verify_vi_points: usize,
    pub sweep: Option<SweepSpec>,
    pub output_path: Option<PathBuf>,
    pub output_format: Option<Format>,
}

fn wrap(e: sale_timing::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn read_model(r: &Reader) -> Result<Model, CliError> {
    let kind = r
        .str_opt("model.kind")?
        .ok_or_else(|| CliError::Config("missing required config key `model.kind`".into()))?;
    match kind {
        "gbm" => Ok(Model::Gbm(
            GbmParams::new(r.f64_req("model.mu")?, r.f64_req("model.sigma")?).map_err(wrap)?,
        )),
        "xou" => Ok(Model::Xou(
            XouParams::new(r.f64_req("model.kappa")?, r.f64_req("model.theta")?, r.f64_req("model.eta")?)
                .map_err(wrap)?,
        )),
        other => Err(CliError::Config(format!(
            "config key `model.kind`: expected \"gbm\" or \"xou\", got \"{other}\""
        ))),
    }
}

fn read_utility(r: &Reader) -> Result<Utility, CliError> {
    let kind = r
        .str_opt("utility.kind")?
        .ok_or_else(|| CliError::Config("missing required config key `utility.kind`".into()))?;
    match kind {
        "exponential" => Utility::exponential(r.f64_req("utility.gamma")?).map_err(wrap),
        "log" => Ok(Utility::Log),
        "power" => Utility::power(r.f64_req("utility.p")?).map_err(wrap),
        other => Err(CliError::Config(format!(
            "config key `utility.kind`: expected \"exponential\", \"log\" or \"power\", got \"{other}\""
        ))),
    }
}

impl RunConfig {
    pub fn from_flat(cfg: &FlatConfig) -> Result<Self, CliError> {
        let r = Reader::new(cfg);
        let model = read_model(&r)?;
        let utility = read_utility(&r)?;
        let rate = r.f64_req("r")?;
        let nu = r.f64_opt("nu")?.unwrap_or(1.0);
        let initial_price = r.f64_opt("initial_price")?.unwrap_or(1.0);
        let problem = ProblemSpec::new(model, utility, rate, nu, initial_price).map_err(wrap)?;

        let grid = read_grid(&r, "grid")?;
        let quantity = read_grid(&r, "quantity")?;
        let curve_mode = match r.str_opt("curve.mode")?.unwrap_or("price") {
            "price" => CurveMode::Price,
            "quantity" => CurveMode::Quantity,
            "surface" => CurveMode::Surface,
            other => {
                return Err(CliError::Config(format!(
                    "config key `curve.mode`: expected \"price\", \"quantity\" or \"surface\", got \"{other}\""
                )))
            }
        };
        let curve_utilities = match r.str_list_opt("curve.utilities")? {
            Some(labels) if labels.is_empty() => {
                return Err(CliError::Config("config key `curve.utilities`: list is empty".into()))
            }
            Some(labels) => labels.iter().map(|l| parse_utility_label(l)).collect::<Result<_, _>>()?,
            None => vec![utility],
        };

        let paths = r.u64_opt("mc.paths")?.unwrap_or(200_000) as usize;
        let dt = r.f64_opt("mc.dt")?.unwrap_or(DEFAULT_DT);
        let horizon = r.f64_opt("mc.horizon")?.unwrap_or_else(|| default_horizon(rate));
        let seed = r.u64_opt("mc.seed")?.unwrap_or(42);
        let mc = McConfig::new(paths, dt, horizon, seed).map_err(wrap)?;

        let verify_prices = r.f64_list_opt("verify.prices")?;
        if let Some(prices) = &verify_prices {
            if prices.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
                return Err(CliError::Config("config key `verify.prices`: prices must be positive".into()));
            }
        }
        let verify_vi_points = r.u64_opt("verify.vi_points")?.unwrap_or(200) as usize;
        if verify_vi_points < 2 {
            return Err(CliError::Config("config key `verify.vi_points`: need at least 2 points".into()));
        }
        let sweep_values = r.f64_list_opt("sweep.values")?;
        let include_analytic = r.bool_opt("sweep.include_analytic")?;
        let sweep_grid = read_grid(&r, "sweep")?;
        let sweep = if sweep_values.is_none() && include_analytic.is_none() && sweep_grid.is_none() {
            None
        } else {
            let mut values = sweep_values.unwrap_or_default();
            if let Some(g) = sweep_grid {
                values.extend(g.values());
            }
            if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(CliError::Config("config key `sweep.values`: thresholds must be positive".into()));
            }
            let include_analytic = include_analytic.unwrap_or(false);
            if values.is_empty() && !include_analytic {
                return Err(CliError::Config("sweep grid is empty".into()));
            }
            Some(SweepSpec {
                values,
                include_analytic,
            })
        };

        let output_path = r.str_opt("output.path")?.map(PathBuf::from);
        let output_format = r.str_opt("output.format")?.map(Format::parse).transpose()?;
        r.finish()?;
        Ok(Self {
            problem,
            grid,
            quantity,
            curve_mode,
            curve_utilities,
            mc,
            verify_prices,
            verify_vi_points,
            sweep,
            output_path,
            output_format,
        })
    }
}
