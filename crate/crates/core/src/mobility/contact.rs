use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DeviceTrack, Point, Sample, Station, TraceSet};
use crate::sim::SimTime;

/// Interval during which a device is within range of a station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactInterval {
    pub device_id: String,
    pub station_id: String,
    pub start: SimTime,
    pub end: SimTime,
}

impl ContactInterval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

const BISECTION_TOL_S: f64 = 1e-6;

/// Squared distance to `center` minus `range^2` along a segment, as a function of
/// the segment fraction `s`.
struct SegmentQuadratic {
    a: f64,
    b: f64,
    c: f64,
}

impl SegmentQuadratic {
    fn new(p0: Point, p1: Point, center: Point, range: f64) -> Self {
        let (dx, dy) = (p1.x - p0.x, p1.y - p0.y);
        let (ox, oy) = (p0.x - center.x, p0.y - center.y);
        SegmentQuadratic {
            a: dx * dx + dy * dy,
            b: 2.0 * (dx * ox + dy * oy),
            c: ox * ox + oy * oy - range * range,
        }
    }

    fn eval(&self, s: f64) -> f64 {
        (self.a * s + self.b) * s + self.c
    }

    fn argmin(&self) -> f64 {
        if self.a == 0.0 {
            0.0
        } else {
            (-self.b / (2.0 * self.a)).clamp(0.0, 1.0)
        }
    }
}

/// Bisects for the boundary between `outside` (f > 0) and `inside` (f <= 0),
/// returning the fraction on the inside side.
fn bisect(q: &SegmentQuadratic, mut outside: f64, mut inside: f64, seg_dt: f64) -> f64 {
    while (inside - outside).abs() * seg_dt > BISECTION_TOL_S {
        let mid = 0.5 * (outside + inside);
        if q.eval(mid) <= 0.0 {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// In-range sub-interval of one segment, as absolute times.
fn segment_inside(a: Sample, b: Sample, center: Point, range: f64) -> Option<(f64, f64)> {
    let q = SegmentQuadratic::new(a.pos, b.pos, center, range);
    let s_min = q.argmin();
    if q.eval(s_min) > 0.0 {
        return None;
    }
    let dt = b.t - a.t;
    let s_in = if q.eval(0.0) <= 0.0 {
        0.0
    } else {
        bisect(&q, 0.0, s_min, dt)
    };
    let s_out = if q.eval(1.0) <= 0.0 {
        1.0
    } else {
        bisect(&q, 1.0, s_min, dt)
    };
    let start = if s_in == 0.0 { a.t } else { a.t + s_in * dt };
    let end = if s_out == 1.0 { b.t } else { a.t + s_out * dt };
    Some((start, end))
}

/// Maximal intervals with the device within `range` of `center`, as raw `(start, end)`
/// seconds. Touch points of zero length are dropped.
fn contact_spans(samples: &[Sample], center: Point, range: f64) -> Vec<(f64, f64)> {
    let mut spans: Vec<(f64, f64)> = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    if samples.len() == 1 {
        return spans;
    }
    for w in samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        // cheap reject: both endpoints far beyond range plus segment length
        let seg_len = a.pos.distance(b.pos);
        if a.pos.distance(center) > range + seg_len {
            if let Some(span) = open.take() {
                spans.push(span);
            }
            continue;
        }
        match segment_inside(a, b, center, range) {
            Some((start, end)) => match open.as_mut() {
                Some(cur) if cur.1 == start => cur.1 = end,
                _ => {
                    if let Some(span) = open.replace((start, end)) {
                        spans.push(span);
                    }
                }
            },
            None => {
                if let Some(span) = open.take() {
                    spans.push(span);
                }
            }
        }
    }
    if let Some(span) = open {
        spans.push(span);
    }
    spans.retain(|(s, e)| e > s);
    spans
}

/// Contact intervals between one track and one station. Interval endpoints are
/// located by bisection to within 1e-6 s and always lie inside the range.
pub fn contacts_with(track: &DeviceTrack, station: &Station, range: f64) -> Vec<ContactInterval> {
    assert!(range > 0.0, "contact range must be positive");
    contact_spans(track.samples(), station.position, range)
        .into_iter()
        .map(|(s, e)| ContactInterval {
            device_id: track.device_id.clone(),
            station_id: station.station_id.clone(),
            start: SimTime::from_secs(s),
            end: SimTime::from_secs(e),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub start: f64,
    pub end: f64,
}

impl Span {
    pub fn duration(self) -> f64 {
        self.end - self.start
    }
}

/// Precomputed contacts for every (device, station) pair, indexed by position in the
/// [`TraceSet`] and the station slice.
#[derive(Debug, Clone)]
pub struct ContactIndex {
    stations: usize,
    spans: Vec<Vec<Span>>,
}

impl ContactIndex {
    /// Uses each station's own `range_m`.
    pub fn build(traces: &TraceSet, stations: &[Station]) -> Self {
        let spans = traces
            .tracks()
            .par_iter()
            .flat_map_iter(|track| {
                stations.iter().map(move |st| {
                    contact_spans(track.samples(), st.position, st.range_m)
                        .into_iter()
                        .map(|(start, end)| Span { start, end })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        ContactIndex {
            stations: stations.len(),
            spans,
        }
    }

    pub fn between(&self, device: usize, station: usize) -> &[Span] {
        &self.spans[device * self.stations + station]
    }

    /// First contact that is still open at or after `after`.
    pub fn next_contact(&self, device: usize, station: usize, after: f64) -> Option<Span> {
        let spans = self.between(device, station);
        let i = spans.partition_point(|s| s.end <= after);
        spans.get(i).copied()
    }

    /// Contact containing `t`, if any.
    pub fn contact_at(&self, device: usize, station: usize, t: f64) -> Option<Span> {
        self.next_contact(device, station, t).filter(|s| s.start <= t)
    }

    /// Every contact as `(device, station, span)`, ordered by start time, then device,
    /// then station.
    pub fn all(&self) -> Vec<(usize, usize, Span)> {
        let mut out: Vec<(usize, usize, Span)> = self
            .spans
            .iter()
            .enumerate()
            .flat_map(|(k, spans)| {
                let (d, s) = (k / self.stations.max(1), k % self.stations.max(1));
                spans.iter().map(move |sp| (d, s, *sp))
            })
            .collect();
        out.sort_by(|a, b| a.2.start.total_cmp(&b.2.start).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        out
    }

    pub fn total(&self) -> usize {
        self.spans.iter().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::{DeviceKind, StationKind};

    fn station_at(x: f64, y: f64) -> Station {
        Station {
            station_id: "s".into(),
            kind: StationKind::Fog,
            position: Point::new(x, y),
            range_m: 10.0,
        }
    }

    fn line_track(points: &[(f64, f64, f64)]) -> DeviceTrack {
        let samples = points
            .iter()
            .map(|&(t, x, y)| Sample {
                t,
                pos: Point::new(x, y),
            })
            .collect();
        DeviceTrack::new("d", DeviceKind::NonScheduled, samples).unwrap()
    }

    #[test]
    fn never_in_range() {
        let tr = line_track(&[(0.0, 100.0, 100.0), (10.0, 200.0, 100.0)]);
        assert!(contacts_with(&tr, &station_at(0.0, 0.0), 10.0).is_empty());
    }

    #[test]
    fn straight_pass_matches_chord() {
        // offset d = 6 from the center, R = 10: chord = 2*sqrt(100-36) = 16, speed 2 m/s
        let tr = line_track(&[(0.0, -50.0, 6.0), (50.0, 50.0, 6.0)]);
        let c = contacts_with(&tr, &station_at(0.0, 0.0), 10.0);
        assert_eq!(c.len(), 1);
        assert!((c[0].duration() - 8.0).abs() < 2e-6);
        assert!((c[0].start.secs() - 21.0).abs() < 1e-6);
    }

    #[test]
    fn chord_split_across_many_samples() {
        let pts: Vec<_> = (0..=100).map(|i| (i as f64, -50.0 + i as f64, 6.0)).collect();
        let tr = line_track(&pts);
        let c = contacts_with(&tr, &station_at(0.0, 0.0), 10.0);
        assert_eq!(c.len(), 1);
        assert!((c[0].duration() - 16.0).abs() < 2e-6);
    }

    #[test]
    fn entirely_inside() {
        let tr = line_track(&[(3.0, 1.0, 1.0), (5.0, 2.0, 2.0), (9.0, -1.0, 0.0)]);
        let c = contacts_with(&tr, &station_at(0.0, 0.0), 10.0);
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].start.secs(), c[0].end.secs()), (3.0, 9.0));
    }

    #[test]
    fn tangent_touch_is_dropped() {
        let tr = line_track(&[(0.0, -20.0, 10.0), (40.0, 20.0, 10.0)]);
        assert!(contacts_with(&tr, &station_at(0.0, 0.0), 10.0).is_empty());
    }

    #[test]
    fn in_out_in_gives_two() {
        let tr = line_track(&[(0.0, 0.0, 0.0), (10.0, 100.0, 0.0), (20.0, 0.0, 0.0)]);
        let c = contacts_with(&tr, &station_at(0.0, 0.0), 10.0);
        assert_eq!(c.len(), 2);
        assert!(c[0].end < c[1].start);
    }

    #[test]
    fn index_lookup() {
        let tr = line_track(&[(0.0, 0.0, 0.0), (10.0, 100.0, 0.0), (20.0, 0.0, 0.0)]);
        let traces = TraceSet::new(vec![tr]);
        let idx = ContactIndex::build(&traces, &[station_at(0.0, 0.0)]);
        assert_eq!(idx.total(), 2);
        let first = idx.contact_at(0, 0, 0.5).unwrap();
        assert_eq!(first.start, 0.0);
        let second = idx.next_contact(0, 0, first.end).unwrap();
        assert!(second.start > 10.0);
        assert!(idx.contact_at(0, 0, 10.0).is_none());
        assert_eq!(idx.all().len(), 2);
    }
}
