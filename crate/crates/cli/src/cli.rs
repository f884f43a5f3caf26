//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::commands::{cmd_curve, cmd_solve, cmd_verify};
use crate::config::{Format, FlatConfig, RunConfig};
use crate::error::{CliError, EXIT_CONFIG, EXIT_OK, EXIT_VERIFICATION};

#[derive(Debug, Parser)]
#[command(
    name = "sale-timing",
    version,
    about = "Optimal timing to sell a risky asset under risk aversion",
    after_help = "Any config key can be overridden with `--<dotted.key> <value>`, e.g. `--model.mu 0.07`."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal strategy and print a summary.
    Solve(CommonArgs),
    /// Write value and certainty-equivalent curves.
    Curve(CommonArgs),
    /// Check the analytic solution against independent oracles.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML config with dotted keys.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; curves go to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "json"])]
    pub format: Option<String>,
    /// Monte-Carlo seed (`mc.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte-Carlo path count (`mc.paths`).
    #[arg(long)]
    pub paths: Option<u64>,
    /// Config override `KEY=VALUE`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Simulate this sale threshold instead of the analytic one.
    #[arg(long)]
    pub override_threshold: Option<f64>,
}

const FIXED_FLAGS: [&str; 9] = [
    "config",
    "out",
    "format",
    "seed",
    "paths",
    "set",
    "override-threshold",
    "help",
    "version",
];

/// Rewrite `--some.key value` and `--some.key=value` into
/// `--set some.key=value` so clap sees a fixed flag set.
pub fn expand_key_flags<I, T>(args: I) -> Vec<OsString>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let mut out = Vec::with_capacity(args.len());
    let mut i = 0;
    while i < args.len() {
        let arg = &args[i];
        let Some(name) = arg.to_str().and_then(|s| s.strip_prefix("--")) else {
            out.push(arg.clone());
            i += 1;
            continue;
        };
        let (key, inline) = match name.split_once('=') {
            Some((k, v)) => (k, Some(v.to_string())),
            None => (name, None),
        };
        if key.is_empty() || FIXED_FLAGS.contains(&key) {
            out.push(arg.clone());
            i += 1;
            continue;
        }
        let value = match inline {
            Some(v) => Some(v),
            None if i + 1 < args.len() => {
                i += 1;
                args[i].to_str().map(str::to_string)
            }
            None => None,
        };
        match value {
            Some(v) => {
                out.push("--set".into());
                out.push(format!("{key}={v}").into());
            }
            None => out.push(arg.clone()),
        }
        i += 1;
    }
    out
}

fn resolve(common: &CommonArgs) -> Result<(RunConfig, Format), CliError> {
    let mut flat = FlatConfig::load(&common.config)?;
    for o in &common.overrides {
        flat.set_override(o)?;
    }
    if let Some(seed) = common.seed {
        flat.set("mc.seed", toml::Value::Integer(seed as i64));
    }
    if let Some(paths) = common.paths {
        flat.set("mc.paths", toml::Value::Integer(paths as i64));
    }
    if let Some(out) = &common.out {
        flat.set("output.path", toml::Value::String(out.display().to_string()));
    }
    if let Some(f) = &common.format {
        flat.set("output.format", toml::Value::String(f.clone()));
    }
    let cfg = RunConfig::from_flat(&flat)?;
    let format = cfg.output_format.unwrap_or(Format::Json);
    Ok((cfg, format))
}

fn write_output(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn execute(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Solve(common) => {
            let (cfg, format) = resolve(&common)?;
            let summary = cmd_solve(&cfg)?;
            print!("{}", summary.human());
            if let Some(path) = &cfg.output_path {
                write_output(path, &summary.render(format))?;
            }
            Ok(EXIT_OK)
        }
        Command::Curve(common) => {
            let (cfg, _) = resolve(&common)?;
            let format = cfg.output_format.unwrap_or(Format::Csv);
            let table = cmd_curve(&cfg)?;
            for w in table.warnings() {
                eprintln!("warning: {w}");
            }
            let text = table.render(format);
            match &cfg.output_path {
                Some(path) => write_output(path, &text)?,
                None => print!("{text}"),
            }
            Ok(EXIT_OK)
        }
        Command::Verify(args) => {
            let (cfg, format) = resolve(&args.common)?;
            let report = cmd_verify(&cfg, args.override_threshold)?;
            print!("{}", report.human());
            if let Some(path) = &cfg.output_path {
                write_output(path, &report.render(format))?;
            }
            Ok(if report.passed { EXIT_OK } else { EXIT_VERIFICATION })
        }
    }
}

/// Run the CLI on `args` (including the program name) and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let cli = match Cli::try_parse_from(expand_key_flags(args)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
