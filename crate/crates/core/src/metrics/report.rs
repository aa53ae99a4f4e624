use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ConvergenceRecord, DeliveryRecord, HandoffSample, MetricsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    Num(f64),
    Int(u64),
    Bool(bool),
    Empty,
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Num(x) => x.to_string(),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Str(s) => Value::from(s.as_str()),
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(n) => Value::from(*n),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// A report table. Rows are written in the order they are stored; the table
/// builders below sort them by their group keys.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> Result<String, MetricsError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text))?;
        }
        let bytes = w.into_inner().map_err(|e| MetricsError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json_string(&self) -> Result<String, MetricsError> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
            .collect();
        let doc = json!({ "name": self.name, "columns": self.columns, "rows": rows });
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }
}

/// Writes `table` to `path`, creating parent directories.
pub fn emit_report(table: &Table, format: ReportFormat, path: &Path) -> Result<(), MetricsError> {
    let body = match format {
        ReportFormat::Csv => table.to_csv_string()?,
        ReportFormat::Json => table.to_json_string()?,
    };
    let io = |source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, body).map_err(io)
}

/// Header and raw rows of a CSV report.
pub fn read_table_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), MetricsError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

pub fn delivery_table(records: &[DeliveryRecord]) -> Table {
    let mut sorted: Vec<&DeliveryRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.target_fog_id, &a.content_id, a.requested_at).cmp(&(&b.target_fog_id, &b.content_id, b.requested_at))
    });
    let mut t = Table::new(
        "delivery",
        &["content_id", "target", "requested_s", "delivered_s", "channel"],
    );
    for r in sorted {
        t.push(vec![
            Cell::Str(r.content_id.clone()),
            Cell::Str(r.target_fog_id.clone()),
            Cell::Num(r.requested_at.secs()),
            r.delivered_at.map(|d| d.secs()).into(),
            Cell::Str(r.channel.as_str().into()),
        ]);
    }
    t
}

pub fn convergence_table(records: &[ConvergenceRecord]) -> Table {
    let mut sorted: Vec<&ConvergenceRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.fog_server_id.cmp(&b.fog_server_id));
    let mut t = Table::new("convergence", &["server_id", "duration_s", "converged"]);
    for r in sorted {
        t.push(vec![
            Cell::Str(r.fog_server_id.clone()),
            r.converged_at.map(|c| c - r.since).into(),
            Cell::Bool(r.converged_at.is_some()),
        ]);
    }
    t
}

pub fn handoff_table(samples: &[HandoffSample]) -> Table {
    let mut sorted: Vec<&HandoffSample> = samples.iter().collect();
    sorted.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.speed_mps.total_cmp(&b.speed_mps))
            .then(a.packet_rate.total_cmp(&b.packet_rate))
    });
    let mut t = Table::new("handoff", &["scheme", "speed_mps", "packet_rate", "delay_s", "success"]);
    for s in sorted {
        t.push(vec![
            Cell::Str(s.scheme.as_str().into()),
            Cell::Num(s.speed_mps),
            Cell::Num(s.packet_rate),
            Cell::Num(s.delay_s),
            Cell::Bool(s.success),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRow {
    pub vehicle_id: String,
    pub speed_mps: f64,
    pub packet_rate: f64,
    pub bits_per_s: f64,
}

pub fn throughput_table(rows: &[ThroughputRow]) -> Table {
    let mut sorted: Vec<&ThroughputRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.speed_mps
            .total_cmp(&b.speed_mps)
            .then(a.packet_rate.total_cmp(&b.packet_rate))
            .then_with(|| a.vehicle_id.cmp(&b.vehicle_id))
    });
    let mut t = Table::new("throughput", &["vehicle_id", "speed_mps", "packet_rate", "bits_per_s"]);
    for r in sorted {
        t.push(vec![
            Cell::Str(r.vehicle_id.clone()),
            Cell::Num(r.speed_mps),
            Cell::Num(r.packet_rate),
            Cell::Num(r.bits_per_s),
        ]);
    }
    t
}
