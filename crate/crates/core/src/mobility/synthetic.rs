//! Synthetic urban traces standing in for recorded taxi/bus data.
//!
//! Scheduled devices (buses) loop over a fixed sequence of fog servers at constant
//! speed with a dwell at every stop, so their visit timetable is known exactly.
//! Non-scheduled devices (taxis) do a random-waypoint walk whose waypoints are
//! biased toward a handful of preferred fog servers.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DeviceKind, DeviceTrack, MobilityError, Point, Sample, Station, TimetableStop, TraceSet, VisitTimetable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticTraceParams {
    pub scheduled_devices: usize,
    pub non_scheduled_devices: usize,
    pub width_m: f64,
    pub height_m: f64,
    pub cadence_s: f64,
    pub duration_s: f64,
    pub bus_speed_mps: f64,
    pub bus_dwell_s: f64,
    pub bus_stops_min: usize,
    pub bus_stops_max: usize,
    pub taxi_speed_min_mps: f64,
    pub taxi_speed_max_mps: f64,
    pub taxi_pause_max_s: f64,
    /// Probability that a taxi waypoint is one of its preferred fog servers.
    pub hotspot_bias: f64,
    pub hotspots_per_taxi: usize,
    pub hotspot_jitter_m: f64,
}

impl Default for SyntheticTraceParams {
    fn default() -> Self {
        SyntheticTraceParams {
            scheduled_devices: 30,
            non_scheduled_devices: 340,
            width_m: 8000.0,
            height_m: 8000.0,
            cadence_s: 7.0,
            duration_s: 86_400.0,
            bus_speed_mps: 6.0,
            bus_dwell_s: 60.0,
            bus_stops_min: 4,
            bus_stops_max: 8,
            taxi_speed_min_mps: 2.0,
            taxi_speed_max_mps: 8.0,
            taxi_pause_max_s: 600.0,
            hotspot_bias: 0.8,
            hotspots_per_taxi: 5,
            hotspot_jitter_m: 100.0,
        }
    }
}

impl SyntheticTraceParams {
    pub fn validate(&self, stations: usize) -> Result<(), MobilityError> {
        let bad = |msg: &str| Err(MobilityError::InvalidParams(msg.to_string()));
        if self.scheduled_devices + self.non_scheduled_devices == 0 {
            return bad("synthetic trace needs at least one device");
        }
        if !(self.duration_s > 0.0) {
            return bad("synthetic trace duration must be positive");
        }
        if !(self.cadence_s > 0.0) {
            return bad("cadence must be positive");
        }
        if !(self.width_m > 0.0 && self.height_m > 0.0) {
            return bad("area must have positive width and height");
        }
        if !(self.taxi_speed_min_mps > 0.0 && self.taxi_speed_min_mps <= self.taxi_speed_max_mps) {
            return bad("taxi speed range must be positive and ordered");
        }
        if !(0.0..=1.0).contains(&self.hotspot_bias) {
            return bad("hotspot_bias must be in [0, 1]");
        }
        if self.scheduled_devices > 0 {
            if !(self.bus_speed_mps > 0.0) || self.bus_dwell_s < 0.0 {
                return bad("bus speed must be positive and dwell non-negative");
            }
            if self.bus_stops_min < 2 || self.bus_stops_min > self.bus_stops_max {
                return bad("bus route needs 2 <= bus_stops_min <= bus_stops_max");
            }
            if stations < self.bus_stops_min {
                return bad("not enough fog servers for the bus routes");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Leg {
    t0: f64,
    t1: f64,
    p0: Point,
    p1: Point,
}

/// Piecewise-linear motion in time.
struct Path {
    legs: Vec<Leg>,
}

impl Path {
    fn position(&self, t: f64) -> Point {
        let i = self.legs.partition_point(|l| l.t1 < t).min(self.legs.len() - 1);
        let leg = self.legs[i];
        if leg.t1 <= leg.t0 {
            return leg.p1;
        }
        leg.p0.lerp(leg.p1, ((t - leg.t0) / (leg.t1 - leg.t0)).clamp(0.0, 1.0))
    }
}

fn sample_times(params: &SyntheticTraceParams) -> impl Iterator<Item = f64> + '_ {
    let n = (params.duration_s / params.cadence_s).floor() as usize;
    (0..=n).map(move |k| k as f64 * params.cadence_s)
}

fn nearest_neighbour_tour(mut stops: Vec<&Station>) -> Vec<&Station> {
    let mut tour = vec![stops.remove(0)];
    while !stops.is_empty() {
        let here = tour[tour.len() - 1].position;
        let (i, _) = stops
            .iter()
            .enumerate()
            .min_by(|a, b| here.distance(a.1.position).total_cmp(&here.distance(b.1.position)))
            .expect("non-empty");
        tour.push(stops.remove(i));
    }
    tour
}

fn bus_track<R: Rng>(
    id: String,
    params: &SyntheticTraceParams,
    fog: &[&Station],
    rng: &mut R,
) -> Result<DeviceTrack, MobilityError> {
    let m = rng.random_range(params.bus_stops_min..=params.bus_stops_max.min(fog.len()));
    let chosen: Vec<&Station> = fog.choose_multiple(rng, m).copied().collect();
    let route = nearest_neighbour_tour(chosen);

    // one loop: dwell at stop j, then drive to stop j+1
    let mut legs = Vec::with_capacity(2 * route.len());
    let mut arrivals = Vec::with_capacity(route.len());
    let mut tau = 0.0;
    for (j, stop) in route.iter().enumerate() {
        let next = route[(j + 1) % route.len()];
        arrivals.push((stop.station_id.clone(), tau));
        legs.push(Leg {
            t0: tau,
            t1: tau + params.bus_dwell_s,
            p0: stop.position,
            p1: stop.position,
        });
        tau += params.bus_dwell_s;
        let drive = stop.position.distance(next.position) / params.bus_speed_mps;
        legs.push(Leg {
            t0: tau,
            t1: tau + drive,
            p0: stop.position,
            p1: next.position,
        });
        tau += drive;
    }
    let period = tau;
    let phase = rng.random_range(0.0..period);
    let path = Path { legs };
    let samples = sample_times(params)
        .map(|t| Sample {
            t,
            pos: path.position((t + phase).rem_euclid(period)),
        })
        .collect();
    let timetable = VisitTimetable {
        period_s: period,
        stops: arrivals
            .into_iter()
            .map(|(station_id, a)| TimetableStop {
                station_id,
                offset_s: (a - phase).rem_euclid(period),
            })
            .collect(),
    };
    DeviceTrack::new(id, DeviceKind::Scheduled(timetable), samples)
}

fn random_point_in_area<R: Rng>(params: &SyntheticTraceParams, rng: &mut R) -> Point {
    Point::new(
        rng.random_range(0.0..params.width_m),
        rng.random_range(0.0..params.height_m),
    )
}

fn taxi_track<R: Rng>(
    id: String,
    params: &SyntheticTraceParams,
    fog: &[&Station],
    rng: &mut R,
) -> Result<DeviceTrack, MobilityError> {
    let hotspots: Vec<Point> = fog
        .choose_multiple(rng, params.hotspots_per_taxi.min(fog.len()))
        .map(|s| s.position)
        .collect();
    let waypoint = |rng: &mut R| -> Point {
        if !hotspots.is_empty() && rng.random_bool(params.hotspot_bias) {
            let centre = hotspots[rng.random_range(0..hotspots.len())];
            let r = params.hotspot_jitter_m * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            Point::new(
                (centre.x + r * a.cos()).clamp(0.0, params.width_m),
                (centre.y + r * a.sin()).clamp(0.0, params.height_m),
            )
        } else {
            random_point_in_area(params, rng)
        }
    };

    let mut legs = Vec::new();
    let mut here = waypoint(rng);
    let mut t = 0.0;
    while t <= params.duration_s {
        let next = waypoint(rng);
        let speed = rng.random_range(params.taxi_speed_min_mps..=params.taxi_speed_max_mps);
        let drive = here.distance(next) / speed;
        legs.push(Leg {
            t0: t,
            t1: t + drive,
            p0: here,
            p1: next,
        });
        t += drive;
        let pause = rng.random_range(0.0..=params.taxi_pause_max_s);
        legs.push(Leg {
            t0: t,
            t1: t + pause,
            p0: next,
            p1: next,
        });
        t += pause;
        here = next;
    }
    let path = Path { legs };
    let samples = sample_times(params)
        .map(|t| Sample {
            t,
            pos: path.position(t),
        })
        .collect();
    DeviceTrack::new(id, DeviceKind::NonScheduled, samples)
}

/// Deterministic for a fixed rng state. Buses are named `bus-NNN`, taxis `taxi-NNN`.
pub fn generate_synthetic_trace<R: Rng>(
    params: &SyntheticTraceParams,
    stations: &[Station],
    rng: &mut R,
) -> Result<TraceSet, MobilityError> {
    let fog: Vec<&Station> = stations.iter().collect();
    params.validate(fog.len())?;
    let mut tracks = Vec::with_capacity(params.scheduled_devices + params.non_scheduled_devices);
    for i in 0..params.scheduled_devices {
        tracks.push(bus_track(format!("bus-{i:03}"), params, &fog, rng)?);
    }
    for i in 0..params.non_scheduled_devices {
        tracks.push(taxi_track(format!("taxi-{i:03}"), params, &fog, rng)?);
    }
    Ok(TraceSet::new(tracks))
}
