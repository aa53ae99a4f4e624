use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MobilityError, Point};

pub const STATION_HEADER: &str = "station_id,kind,x_m,y_m,range_m";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StationKind {
    Fog,
    Ap,
}

/// Fixed infrastructure node: a fog server or an access point.
#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub station_id: String,
    pub kind: StationKind,
    pub position: Point,
    pub range_m: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct StationRow {
    station_id: String,
    kind: StationKind,
    x_m: f64,
    y_m: f64,
    range_m: f64,
}

pub fn load_stations(path: impl AsRef<Path>) -> Result<Vec<Station>, MobilityError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| MobilityError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != STATION_HEADER {
        return Err(MobilityError::HeaderMismatch {
            expected: STATION_HEADER.to_string(),
            found: header,
        });
    }
    let mut stations = Vec::new();
    for row in reader.deserialize::<StationRow>() {
        let row = row?;
        if !(row.range_m > 0.0) {
            return Err(MobilityError::InvalidParams(format!(
                "station {} has non-positive range {}",
                row.station_id, row.range_m
            )));
        }
        stations.push(Station {
            station_id: row.station_id,
            kind: row.kind,
            position: Point::new(row.x_m, row.y_m),
            range_m: row.range_m,
        });
    }
    stations.sort_by(|a, b| a.station_id.cmp(&b.station_id));
    Ok(stations)
}

pub fn write_stations(stations: &[Station], path: impl AsRef<Path>) -> Result<(), MobilityError> {
    let path = path.as_ref();
    let io_err = |source| MobilityError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(out, "{STATION_HEADER}").map_err(io_err)?;
    for s in stations {
        let kind = match s.kind {
            StationKind::Fog => "fog",
            StationKind::Ap => "ap",
        };
        writeln!(
            out,
            "{},{},{},{},{}",
            s.station_id, kind, s.position.x, s.position.y, s.range_m
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Places `count` fog servers on a jittered grid over `[0, width] x [0, height]`.
/// Ids are zero-padded (`fs-00`, `fs-01`, ...) so lexical order equals index order.
pub fn generate_fog_grid<R: Rng>(count: usize, width: f64, height: f64, range_m: f64, rng: &mut R) -> Vec<Station> {
    if count == 0 {
        return Vec::new();
    }
    let cols = (count as f64 * width / height).sqrt().ceil().max(1.0) as usize;
    let rows = count.div_ceil(cols);
    let (cell_w, cell_h) = (width / cols as f64, height / rows as f64);
    let digits = (count - 1).to_string().len().max(2);
    (0..count)
        .map(|i| {
            let (c, r) = (i % cols, i / cols);
            let jx = rng.random_range(0.25..0.75);
            let jy = rng.random_range(0.25..0.75);
            Station {
                station_id: format!("fs-{i:0digits$}"),
                kind: StationKind::Fog,
                position: Point::new((c as f64 + jx) * cell_w, (r as f64 + jy) * cell_h),
                range_m,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::RngStream;

    #[test]
    fn station_file_roundtrip() {
        let mut rng = RngStream::new(1, "stations");
        let stations = generate_fog_grid(12, 1000.0, 500.0, 80.0, &mut rng);
        let f = tempfile::NamedTempFile::new().unwrap();
        write_stations(&stations, f.path()).unwrap();
        assert_eq!(load_stations(f.path()).unwrap(), stations);
    }

    #[test]
    fn grid_stays_in_area() {
        let mut rng = RngStream::new(2, "stations");
        let stations = generate_fog_grid(50, 8000.0, 8000.0, 300.0, &mut rng);
        assert_eq!(stations.len(), 50);
        assert!(stations
            .iter()
            .all(|s| (0.0..=8000.0).contains(&s.position.x) && (0.0..=8000.0).contains(&s.position.y)));
        assert_eq!(stations[7].station_id, "fs-07");
    }

    #[test]
    fn rejects_bad_header() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), "id,kind,x,y,r\n").unwrap();
        assert!(load_stations(f.path()).is_err());
    }
}
