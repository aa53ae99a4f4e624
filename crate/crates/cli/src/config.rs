use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use vfog_core::analytics::{AnalyticParams, FormulaVariant};
use vfog_core::cvfh::CvfhConfig;
use vfog_core::fogroute::FogRouteConfig;
use vfog_core::metrics::ReportFormat;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Analytic,
    SimFogroute,
    SimCvfh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub mode: Mode,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Overrides the horizon of the selected simulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub report_format: ReportFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<AnalyticBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fogroute: Option<FogRouteBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cvfh: Option<CvfhConfig>,
}

fn default_format() -> ReportFormat {
    ReportFormat::Csv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticBlock {
    pub params: AnalyticParams,
    /// Parameter name to the values it takes; the sweep is their product.
    pub grid: BTreeMap<String, Vec<f64>>,
    pub variants: Vec<FormulaVariant>,
    /// Monte-Carlo trials per quantity and grid point; 0 skips the check.
    pub monte_carlo_trials: u64,
}

impl Default for AnalyticBlock {
    fn default() -> Self {
        AnalyticBlock {
            params: AnalyticParams::default(),
            grid: BTreeMap::new(),
            variants: FormulaVariant::ALL.to_vec(),
            monte_carlo_trials: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FogRouteBlock {
    pub scenario: FogRouteConfig,
    /// Station CSV; generated on a grid when absent.
    pub stations_file: Option<PathBuf>,
    /// Trace CSV; synthesized when absent.
    pub trace_file: Option<PathBuf>,
    /// Extra delays at which the delivery ratio is reported, besides the
    /// affordable delay.
    pub expected_delays_s: Vec<f64>,
}

impl Default for FogRouteBlock {
    fn default() -> Self {
        FogRouteBlock {
            scenario: FogRouteConfig::default(),
            stations_file: None,
            trace_file: None,
            expected_delays_s: [2.0, 6.0, 8.0, 10.0].iter().map(|h| h * 3600.0).collect(),
        }
    }
}

/// Reads a config file as JSON without interpreting it yet.
pub fn read_config_value(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Splits `key=value`. The value is JSON when it parses as JSON, a string
/// otherwise.
pub fn parse_assignment(s: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| CliError::Override(format!("expected key=value, got `{s}`")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Override(format!("empty key in `{s}`")));
    }
    Ok((key.to_string(), parse_scalar(raw.trim())))
}

pub fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Sets the dotted `key` inside `root`, creating objects along the way.
pub fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::Override(format!("`{}` is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one part")
}

pub fn get_path<'a>(root: &'a Value, key: &str) -> Option<&'a Value> {
    key.split('.').try_fold(root, |cur, part| cur.get(part))
}

/// Converts unit-suffixed strings under keys ending in `_mps` (`km/h`, `m/s`)
/// and `_s` (`h`, `min`, `s`) to plain numbers in SI units.
pub fn normalize_units(value: &mut Value) -> Result<(), CliError> {
    normalize_at(value, "")
}

fn normalize_at(value: &mut Value, key: &str) -> Result<(), CliError> {
    match value {
        Value::Object(map) => {
            for (k, v) in map.iter_mut() {
                normalize_at(v, k)?;
            }
        }
        Value::Array(items) => {
            for v in items {
                normalize_at(v, key)?;
            }
        }
        Value::String(s) => {
            let converted = if key.ends_with("_mps") {
                convert(s, &[("km/h", 1.0 / 3.6), ("m/s", 1.0)])
            } else if key.ends_with("_s") {
                convert(s, &[("min", 60.0), ("h", 3600.0), ("s", 1.0)])
            } else {
                return Ok(());
            };
            let x = converted.ok_or_else(|| CliError::Units {
                key: key.to_string(),
                value: s.clone(),
            })?;
            *value = serde_json::Number::from_f64(x)
                .map(Value::Number)
                .ok_or_else(|| CliError::Units {
                    key: key.to_string(),
                    value: x.to_string(),
                })?;
        }
        _ => {}
    }
    Ok(())
}

fn convert(s: &str, units: &[(&str, f64)]) -> Option<f64> {
    let s = s.trim();
    units.iter().find_map(|(suffix, factor)| {
        let number = s.strip_suffix(suffix)?.trim();
        number.parse::<f64>().ok().filter(|x| x.is_finite()).map(|x| x * factor)
    })
}

/// Parses a config value, naming the offending field on failure, and fills in
/// the seed and the block for the selected mode.
pub fn resolve(mut value: Value) -> Result<ScenarioConfig, CliError> {
    normalize_units(&mut value)?;
    let mut config: ScenarioConfig = serde_path_to_error::deserialize(value).map_err(|e| CliError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if config.schema_version != SCHEMA_VERSION {
        return Err(CliError::Invalid(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            config.schema_version
        )));
    }
    config.seed.get_or_insert(DEFAULT_SEED);
    let stray = match config.mode {
        Mode::Analytic => [("fogroute", config.fogroute.is_some()), ("cvfh", config.cvfh.is_some())],
        Mode::SimFogroute => [("analytic", config.analytic.is_some()), ("cvfh", config.cvfh.is_some())],
        Mode::SimCvfh => [
            ("analytic", config.analytic.is_some()),
            ("fogroute", config.fogroute.is_some()),
        ],
    };
    if let Some((block, _)) = stray.iter().find(|(_, present)| *present) {
        return Err(CliError::Invalid(format!(
            "block `{block}` does not belong to mode {:?}",
            config.mode
        )));
    }
    match config.mode {
        Mode::Analytic => {
            config.analytic.get_or_insert_with(AnalyticBlock::default);
            if config.duration_s.is_some() {
                return Err(CliError::Invalid("duration_s has no meaning in analytic mode".into()));
            }
        }
        Mode::SimFogroute => {
            let block = config.fogroute.get_or_insert_with(FogRouteBlock::default);
            if let Some(d) = config.duration_s.take() {
                block.scenario.horizon_s = d;
            }
            block.scenario.validate()?;
        }
        Mode::SimCvfh => {
            let block = config.cvfh.get_or_insert_with(CvfhConfig::default);
            if let Some(d) = config.duration_s.take() {
                block.duration_s = d;
            }
            block.validate()?;
        }
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn units_are_converted() {
        let mut v = json!({"cvfh": {"cv_speed_mps": "72 km/h", "duration_s": "2h"}, "x_s": ["30min", "5s"]});
        normalize_units(&mut v).unwrap();
        assert_eq!(v["cvfh"]["cv_speed_mps"], json!(20.0));
        assert_eq!(v["cvfh"]["duration_s"], json!(7200.0));
        assert_eq!(v["x_s"], json!([1800.0, 5.0]));
        let mut bad = json!({"cv_speed_mps": "fast"});
        assert!(normalize_units(&mut bad).is_err());
    }

    #[test]
    fn unknown_keys_fail_with_path() {
        let v = json!({"schema_version": 1, "mode": "sim_cvfh", "cvfh": {"link": {"n_vv": 3, "bogus": 1}}});
        match resolve(v) {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "cvfh.link.bogus"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn seed_and_block_are_filled() {
        let c = resolve(json!({"schema_version": 1, "mode": "analytic"})).unwrap();
        assert_eq!(c.seed, Some(DEFAULT_SEED));
        assert!(c.analytic.is_some());
        let again = resolve(serde_json::to_value(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn foreign_block_rejected() {
        let v = json!({"schema_version": 1, "mode": "analytic", "cvfh": {}});
        assert!(matches!(resolve(v), Err(CliError::Invalid(_))));
    }

    #[test]
    fn assignments() {
        let (k, v) = parse_assignment("cvfh.packet_rate_pps=200").unwrap();
        assert_eq!((k.as_str(), v), ("cvfh.packet_rate_pps", json!(200)));
        let (_, v) = parse_assignment("mode=sim_cvfh").unwrap();
        assert_eq!(v, json!("sim_cvfh"));
        assert!(parse_assignment("novalue").is_err());
        let mut root = json!({"a": {"b": 1}});
        set_path(&mut root, "a.c.d", json!(2)).unwrap();
        assert_eq!(get_path(&root, "a.c.d"), Some(&json!(2)));
        assert!(set_path(&mut root, "a.b.x", json!(0)).is_err());
    }
}
