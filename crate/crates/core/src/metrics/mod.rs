//! Experiment metrics and deterministic report files.

mod records;
mod report;

pub use records::{
    convergence_times, delivery_ratio, handoff_delay_stats, throughput, Channel, ConvergenceRecord, ConvergenceSummary,
    DeliveryRecord, GroupBy, HandoffSample, HandoffStats, Scheme, ThroughputRecord, ThroughputSummary,
};
pub use report::{
    convergence_table, delivery_table, emit_report, handoff_table, read_table_csv, throughput_table, Cell,
    ReportFormat, Table, ThroughputRow,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no records")]
    Empty,
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
