//! Device trajectories and the geometric queries built on them.
//!
//! Coordinates are planar meters. Real GPS traces have to be projected before
//! they are loaded; the trace CSV carries `x_m`/`y_m`, not latitude/longitude.

mod contact;
mod geometry;
mod highway;
mod stations;
mod synthetic;
mod trace;
mod visits;

pub use contact::{contacts_with, ContactIndex, ContactInterval, Span};
pub use geometry::Point;
pub use highway::{sample_highway, Direction, HighwayFlowParams, HighwayVehicle};
pub use stations::{generate_fog_grid, load_stations, write_stations, Station, StationKind};
pub use synthetic::{generate_synthetic_trace, SyntheticTraceParams};
pub use trace::{
    load_trace, write_trace, DeviceKind, DeviceTrack, LoadReport, LoadedTrace, RejectedDevice, Sample, TimetableStop,
    TracePoint, TraceSet, VisitTimetable, TRACE_HEADER,
};
pub use visits::{
    average_speed_and_direction, estimated_delivery_time, MotionEstimate, VisitHistory, VisitRecord,
    MIN_PROJECTED_SPEED,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MobilityError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    HeaderMismatch { expected: String, found: String },
    #[error("time {t} outside track span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },
    #[error("track for {device_id} is not strictly increasing in time at sample {index}")]
    NonMonotonic { device_id: String, index: usize },
    #[error("track for {0} has no samples")]
    EmptyTrack(String),
    #[error("need at least 2 visits to estimate motion, have {0}")]
    InsufficientVisits(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}
