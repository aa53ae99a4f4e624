use std::path::Path;

use rayon::prelude::*;
use serde_json::Value;
use vfog_core::metrics::{emit_report, Cell, Table};

use crate::config::{get_path, resolve, set_path};
use crate::run::{execute, RunOutput};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub runs: Vec<RunOutput>,
    pub summary: Table,
}

/// One run per value of `axis`, each in `out/run_NNN` and seeded with the base
/// seed XOR its index, plus a merged summary ordered by index.
pub fn sweep(base: Value, axis: &str, values: &[Value], out: &Path) -> Result<SweepOutput, CliError> {
    if values.is_empty() {
        return Err(CliError::Invalid(format!("sweep over `{axis}` has no values")));
    }
    let resolved = resolve(base)?;
    let resolved_value = serde_json::to_value(&resolved).map_err(|e| CliError::Invalid(e.to_string()))?;
    if get_path(&resolved_value, axis).is_none() {
        return Err(CliError::Invalid(format!("sweep axis `{axis}` is not a config key")));
    }
    let seed = resolved.seed.expect("resolved configs carry a seed");
    let configs = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut value = resolved_value.clone();
            set_path(&mut value, axis, v.clone())?;
            set_path(&mut value, "seed", Value::from(seed ^ i as u64))?;
            resolve(value)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let runs = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| execute(c, &out.join(format!("run_{i:03}"))))
        .collect::<Result<Vec<_>, _>>()?;

    let headline_keys: Vec<&str> = runs[0].headline.iter().map(|(k, _)| k.as_str()).collect();
    let columns: Vec<&str> = ["index", "seed", axis].into_iter().chain(headline_keys).collect();
    let mut summary = Table::new("summary", &columns);
    for (i, (run, config)) in runs.iter().zip(&configs).enumerate() {
        // The resolved value, so unit-suffixed inputs show up converted.
        let value = serde_json::to_value(config).map_err(|e| CliError::Invalid(e.to_string()))?;
        let mut row = vec![
            Cell::Int(i as u64),
            Cell::Int(config.seed.expect("resolved")),
            get_path(&value, axis).map_or(Cell::Empty, axis_cell),
        ];
        row.extend(run.headline.iter().map(|(_, v)| Cell::from(*v)));
        summary.push(row);
    }
    emit_report(
        &summary,
        resolved.report_format,
        &out.join(format!("summary.{}", resolved.report_format.extension())),
    )?;
    Ok(SweepOutput { runs, summary })
}

fn axis_cell(v: &Value) -> Cell {
    match v {
        Value::Number(n) => n.as_f64().map_or(Cell::Empty, Cell::Num),
        Value::Bool(b) => Cell::Bool(*b),
        Value::String(s) => Cell::Str(s.clone()),
        Value::Null => Cell::Empty,
        other => Cell::Str(other.to_string()),
    }
}
