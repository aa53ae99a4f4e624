use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{MobilityError, Point};
use crate::sim::SimTime;

/// Exact header line of the trace CSV format.
pub const TRACE_HEADER: &str = "device_id,t_s,x_m,y_m";

/// One row of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub device_id: String,
    #[serde(rename = "t_s")]
    pub t: SimTime,
    #[serde(rename = "x_m")]
    pub x: f64,
    #[serde(rename = "y_m")]
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub pos: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimetableStop {
    pub station_id: String,
    /// Arrival offset within the period, in `[0, period_s)`.
    pub offset_s: f64,
}

/// Periodic visit schedule of a scheduled device (bus, shuttle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitTimetable {
    pub period_s: f64,
    pub stops: Vec<TimetableStop>,
}

impl VisitTimetable {
    pub fn serves(&self, station_id: &str) -> bool {
        self.stops.iter().any(|s| s.station_id == station_id)
    }

    /// Earliest scheduled arrival at `station_id` at or after `after` seconds.
    pub fn next_arrival(&self, station_id: &str, after: f64) -> Option<f64> {
        self.stops
            .iter()
            .filter(|s| s.station_id == station_id)
            .map(|s| {
                let k = ((after - s.offset_s) / self.period_s).ceil().max(0.0);
                s.offset_s + k * self.period_s
            })
            .min_by(f64::total_cmp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeviceKind {
    Scheduled(VisitTimetable),
    NonScheduled,
}

impl DeviceKind {
    pub fn timetable(&self) -> Option<&VisitTimetable> {
        match self {
            DeviceKind::Scheduled(tt) => Some(tt),
            DeviceKind::NonScheduled => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceTrack {
    pub device_id: String,
    pub kind: DeviceKind,
    samples: Vec<Sample>,
}

impl DeviceTrack {
    pub fn new(device_id: impl Into<String>, kind: DeviceKind, samples: Vec<Sample>) -> Result<Self, MobilityError> {
        let device_id = device_id.into();
        if samples.is_empty() {
            return Err(MobilityError::EmptyTrack(device_id));
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(MobilityError::NonMonotonic {
                device_id,
                index: i + 1,
            });
        }
        Ok(DeviceTrack {
            device_id,
            kind,
            samples,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn is_scheduled(&self) -> bool {
        matches!(self.kind, DeviceKind::Scheduled(_))
    }

    /// Linear interpolation between the bracketing samples.
    pub fn position_at(&self, t: f64) -> Result<Point, MobilityError> {
        if !(self.start()..=self.end()).contains(&t) {
            return Err(MobilityError::OutOfSpan {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        let i = self.samples.partition_point(|s| s.t <= t);
        // i >= 1 because t >= start
        let a = self.samples[i - 1];
        if a.t == t || i == self.samples.len() {
            return Ok(a.pos);
        }
        let b = self.samples[i];
        Ok(a.pos.lerp(b.pos, (t - a.t) / (b.t - a.t)))
    }

    /// Direction of travel at `t`, from the segment containing it (or the last one).
    /// `None` while stationary or outside the span.
    pub fn heading_at(&self, t: f64) -> Option<f64> {
        if self.samples.len() < 2 || t < self.start() || t > self.end() {
            return None;
        }
        let i = self
            .samples
            .partition_point(|s| s.t <= t)
            .clamp(1, self.samples.len() - 1);
        let (a, b) = (self.samples[i - 1].pos, self.samples[i].pos);
        if a.distance(b) == 0.0 {
            None
        } else {
            Some(a.bearing_to(b))
        }
    }
}

/// Immutable set of device tracks, ordered by device id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceSet {
    tracks: Vec<DeviceTrack>,
    index: BTreeMap<String, usize>,
}

impl TraceSet {
    pub fn new(mut tracks: Vec<DeviceTrack>) -> Self {
        tracks.sort_by(|a, b| a.device_id.cmp(&b.device_id));
        tracks.dedup_by(|a, b| a.device_id == b.device_id);
        let index = tracks
            .iter()
            .enumerate()
            .map(|(i, t)| (t.device_id.clone(), i))
            .collect();
        TraceSet { tracks, index }
    }

    pub fn tracks(&self) -> &[DeviceTrack] {
        &self.tracks
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn get(&self, device_id: &str) -> Option<&DeviceTrack> {
        self.index.get(device_id).map(|&i| &self.tracks[i])
    }

    pub fn position_of(&self, device_id: &str) -> Option<usize> {
        self.index.get(device_id).copied()
    }

    pub fn total_points(&self) -> usize {
        self.tracks.iter().map(|t| t.samples.len()).sum()
    }

    /// Marks a loaded device as scheduled; trace files carry no schedule column.
    pub fn set_kind(&mut self, device_id: &str, kind: DeviceKind) -> bool {
        match self.index.get(device_id) {
            Some(&i) => {
                self.tracks[i].kind = kind;
                true
            }
            None => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedDevice {
    pub device_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub rows_read: usize,
    pub malformed_rows: usize,
    pub rejected: Vec<RejectedDevice>,
}

#[derive(Debug, Clone)]
pub struct LoadedTrace {
    pub traces: TraceSet,
    pub report: LoadReport,
}

/// Reads a trace CSV. Rows may be interleaved across devices but each device's
/// rows must already be in strictly increasing time order; devices that violate
/// this are rejected with a warning and listed in the report.
pub fn load_trace(path: impl AsRef<Path>) -> Result<LoadedTrace, MobilityError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| MobilityError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != TRACE_HEADER {
        return Err(MobilityError::HeaderMismatch {
            expected: TRACE_HEADER.to_string(),
            found: header,
        });
    }

    let mut report = LoadReport::default();
    let mut per_device: BTreeMap<String, Vec<Sample>> = BTreeMap::new();
    let mut broken: BTreeMap<String, String> = BTreeMap::new();
    for row in reader.deserialize::<TracePoint>() {
        report.rows_read += 1;
        let point = match row {
            Ok(p) if p.x.is_finite() && p.y.is_finite() => p,
            _ => {
                report.malformed_rows += 1;
                continue;
            }
        };
        let samples = per_device.entry(point.device_id.clone()).or_default();
        if let Some(last) = samples.last() {
            if point.t.secs() <= last.t && !broken.contains_key(&point.device_id) {
                broken.insert(
                    point.device_id.clone(),
                    format!(
                        "timestamp {} does not follow {} (row {})",
                        point.t.secs(),
                        last.t,
                        report.rows_read
                    ),
                );
            }
        }
        samples.push(Sample {
            t: point.t.secs(),
            pos: Point::new(point.x, point.y),
        });
    }

    let mut tracks = Vec::with_capacity(per_device.len());
    for (device_id, samples) in per_device {
        if let Some(reason) = broken.remove(&device_id) {
            warn!("rejecting device {device_id}: {reason}");
            report.rejected.push(RejectedDevice { device_id, reason });
            continue;
        }
        tracks.push(DeviceTrack::new(device_id, DeviceKind::NonScheduled, samples)?);
    }
    Ok(LoadedTrace {
        traces: TraceSet::new(tracks),
        report,
    })
}

/// Writes tracks in the trace CSV format, device by device.
pub fn write_trace(traces: &TraceSet, path: impl AsRef<Path>) -> Result<(), MobilityError> {
    let path = path.as_ref();
    let io_err = |source| MobilityError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(out, "{TRACE_HEADER}").map_err(io_err)?;
    for track in traces.tracks() {
        for s in track.samples() {
            writeln!(out, "{},{},{},{}", track.device_id, s.t, s.pos.x, s.pos.y).map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}
