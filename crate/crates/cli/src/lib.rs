//! Experiment runner: reads a JSON scenario, applies command-line overrides,
//! runs the analytic sweep or one of the simulators, and writes reports next
//! to a `resolved_config.json` that reproduces the run.

pub mod config;
pub mod run;
pub mod sweep;

use std::path::PathBuf;

use clap::Parser;
use thiserror::Error;
use vfog_core::analytics::{AnalyticsError, FormulaVariant};
use vfog_core::cvfh::CvfhError;
use vfog_core::fogroute::FogRouteError;
use vfog_core::metrics::MetricsError;
use vfog_core::mobility::MobilityError;

pub use config::{resolve, Mode, ScenarioConfig};
pub use run::{execute, RunOutput};
pub use sweep::{sweep, SweepOutput};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("bad override: {0}")]
    Override(String),
    #[error("cannot read `{value}` for {key} (expected a number or a unit suffix)")]
    Units { key: String, value: String },
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    FogRoute(#[from] FogRouteError),
    #[error(transparent)]
    Cvfh(#[from] CvfhError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl CliError {
    /// 2 for anything wrong with the input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. }
            | CliError::Schema { .. }
            | CliError::Invalid(_)
            | CliError::Override(_)
            | CliError::Units { .. } => 2,
            CliError::FogRoute(FogRouteError::InvalidConfig(_))
            | CliError::Cvfh(CvfhError::InvalidConfig(_))
            | CliError::Analytics(AnalyticsError::InvalidParams { .. } | AnalyticsError::UnknownParam(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "vfog",
    version,
    about = "Run vehicular fog dissemination and handoff experiments"
)]
pub struct Args {
    /// Scenario config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dotted key override, e.g. `cvfh.packet_rate_pps=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory; defaults to the config's `output_dir`, then `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key=v1,v2,...`: one run per value.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Restrict analytic output to one formula variant.
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<FormulaVariant>,
}

fn parse_variant(s: &str) -> Result<FormulaVariant, String> {
    FormulaVariant::ALL
        .into_iter()
        .find(|v| v.as_str() == s)
        .ok_or_else(|| format!("unknown variant `{s}` (as_written | corrected)"))
}

pub enum Outcome {
    Run(RunOutput),
    Sweep(SweepOutput),
}

pub fn run_args(args: &Args) -> Result<Outcome, CliError> {
    let mut value = config::read_config_value(&args.config)?;
    for o in &args.overrides {
        let (key, v) = config::parse_assignment(o)?;
        config::set_path(&mut value, &key, v)?;
    }
    if let Some(seed) = args.seed {
        config::set_path(&mut value, "seed", seed.into())?;
    }
    if let Some(variant) = args.variant {
        config::set_path(&mut value, "analytic.variants", serde_json::json!([variant.as_str()]))?;
    }
    let out = match &args.out {
        Some(p) => p.clone(),
        None => value
            .get("output_dir")
            .and_then(|v| v.as_str())
            .map_or_else(|| PathBuf::from("out"), PathBuf::from),
    };
    match &args.sweep {
        Some(spec) => {
            let (axis, list) = spec
                .split_once('=')
                .ok_or_else(|| CliError::Override(format!("expected key=v1,v2,..., got `{spec}`")))?;
            let values: Vec<_> = list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(config::parse_scalar)
                .collect();
            sweep(value, axis.trim(), &values, &out).map(Outcome::Sweep)
        }
        None => {
            let resolved = resolve(value)?;
            execute(&resolved, &out).map(Outcome::Run)
        }
    }
}
