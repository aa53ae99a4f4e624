use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{MobilityError, Point};
use crate::sim::SimTime;

/// Floor on the projected approach speed, m/s.
pub const MIN_PROJECTED_SPEED: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub device_id: String,
    pub fog_server_id: String,
    pub arrival: SimTime,
    pub position: Point,
}

/// Bounded visit log: the `k` most recent visits per (device, fog server) pair.
#[derive(Debug, Clone)]
pub struct VisitHistory {
    k: usize,
    by_pair: BTreeMap<(String, String), VecDeque<VisitRecord>>,
}

impl VisitHistory {
    /// `k` is raised to at least 3.
    pub fn new(k: usize) -> Self {
        VisitHistory {
            k: k.max(3),
            by_pair: BTreeMap::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.k
    }

    pub fn record(&mut self, visit: VisitRecord) {
        let key = (visit.device_id.clone(), visit.fog_server_id.clone());
        let q = self.by_pair.entry(key).or_default();
        q.push_back(visit);
        while q.len() > self.k {
            q.pop_front();
        }
    }

    pub fn visits(&self, device_id: &str, fog_server_id: &str) -> impl Iterator<Item = &VisitRecord> {
        self.by_pair
            .get(&(device_id.to_string(), fog_server_id.to_string()))
            .into_iter()
            .flatten()
    }

    /// The device's `n` most recent visits across all fog servers, oldest first.
    ///
    /// With `n <= k` this is exact: each of the `n` latest visits is among the `k`
    /// latest of its own pair.
    pub fn recent_for_device(&self, device_id: &str, n: usize) -> Vec<VisitRecord> {
        let lo = (device_id.to_string(), String::new());
        let mut all: Vec<&VisitRecord> = self
            .by_pair
            .range(lo..)
            .take_while(|((d, _), _)| d == device_id)
            .flat_map(|(_, q)| q.iter())
            .collect();
        all.sort_by(|a, b| {
            a.arrival
                .cmp(&b.arrival)
                .then_with(|| a.fog_server_id.cmp(&b.fog_server_id))
        });
        let skip = all.len().saturating_sub(n);
        all.into_iter().skip(skip).cloned().collect()
    }
}

/// Movement summary derived from a device's most recent visits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionEstimate {
    /// Mean of the segment speeds between consecutive visits, m/s.
    pub speed: f64,
    /// Direction of the latest non-zero displacement between visits, radians.
    /// `None` when every retained visit sits at the same spot.
    pub heading: Option<f64>,
    /// Direction from the most recent visit position toward the fog server, radians.
    pub bearing: f64,
}

/// Speed and direction from the last three visits (or all, if fewer), oldest first.
pub fn average_speed_and_direction(visits: &[VisitRecord], fog_server: Point) -> Result<MotionEstimate, MobilityError> {
    if visits.len() < 2 {
        return Err(MobilityError::InsufficientVisits(visits.len()));
    }
    let recent = &visits[visits.len().saturating_sub(3)..];
    let mut speeds = Vec::with_capacity(recent.len() - 1);
    let mut heading = None;
    for w in recent.windows(2) {
        let dt = w[1].arrival - w[0].arrival;
        let dist = w[0].position.distance(w[1].position);
        if dt > 0.0 {
            speeds.push(dist / dt);
        }
        if dist > 0.0 {
            heading = Some(w[0].position.bearing_to(w[1].position));
        }
    }
    let speed = if speeds.is_empty() {
        0.0
    } else {
        speeds.iter().sum::<f64>() / speeds.len() as f64
    };
    let last = recent[recent.len() - 1].position;
    Ok(MotionEstimate {
        speed,
        heading,
        bearing: last.bearing_to(fog_server),
    })
}

/// Time to reach `server` from `current` moving at `speed` along `heading`:
/// distance over the speed component pointing at the server. Returns
/// `f64::INFINITY` when the device is stationary or heading away.
pub fn estimated_delivery_time(current: Point, heading: f64, speed: f64, server: Point) -> f64 {
    let distance = current.distance(server);
    if distance == 0.0 {
        return 0.0;
    }
    if !(speed > 0.0) {
        return f64::INFINITY;
    }
    let cos = (heading - current.bearing_to(server)).cos();
    if cos <= 0.0 {
        return f64::INFINITY;
    }
    distance / (speed * cos).max(MIN_PROJECTED_SPEED)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_3, PI};

    fn visit(t: f64, x: f64, y: f64) -> VisitRecord {
        VisitRecord {
            device_id: "d".into(),
            fog_server_id: "f".into(),
            arrival: SimTime::from_secs(t),
            position: Point::new(x, y),
        }
    }

    #[test]
    fn two_visits_speed() {
        let est = average_speed_and_direction(&[visit(0.0, 0.0, 0.0), visit(10.0, 100.0, 0.0)], Point::new(200.0, 0.0))
            .unwrap();
        assert_eq!(est.speed, 10.0);
        assert_eq!(est.heading, Some(0.0));
        assert_eq!(est.bearing, 0.0);
    }

    #[test]
    fn collinear_equal_spacing() {
        let v = [visit(0.0, 0.0, 0.0), visit(5.0, 20.0, 0.0), visit(10.0, 40.0, 0.0)];
        let est = average_speed_and_direction(&v, Point::new(0.0, 0.0)).unwrap();
        assert_eq!(est.speed, 4.0);
        assert!((est.bearing - PI).abs() < 1e-12);
    }

    #[test]
    fn three_four_five_segments() {
        let v = [visit(0.0, 0.0, 0.0), visit(10.0, 30.0, 40.0), visit(20.0, 60.0, 80.0)];
        let est = average_speed_and_direction(&v, Point::new(0.0, 0.0)).unwrap();
        assert_eq!(est.speed, 5.0);
    }

    #[test]
    fn uses_only_last_three() {
        let v = [
            visit(0.0, 0.0, 0.0),
            visit(1.0, 1000.0, 0.0),
            visit(11.0, 1010.0, 0.0),
            visit(21.0, 1020.0, 0.0),
        ];
        let est = average_speed_and_direction(&v, Point::default()).unwrap();
        assert_eq!(est.speed, 1.0);
    }

    #[test]
    fn single_visit_is_error() {
        assert!(matches!(
            average_speed_and_direction(&[visit(0.0, 0.0, 0.0)], Point::default()),
            Err(MobilityError::InsufficientVisits(1))
        ));
    }

    #[test]
    fn delivery_time_cases() {
        let here = Point::new(0.0, 0.0);
        let server = Point::new(100.0, 0.0);
        assert_eq!(estimated_delivery_time(here, 0.0, 10.0, server), 10.0);
        assert_eq!(estimated_delivery_time(here, PI, 10.0, server), f64::INFINITY);
        let t = estimated_delivery_time(here, FRAC_PI_3, 10.0, server);
        assert!((t - 20.0).abs() < 1e-9);
        assert_eq!(estimated_delivery_time(here, 0.0, 0.0, server), f64::INFINITY);
    }

    #[test]
    fn history_keeps_k_latest_per_pair() {
        let mut h = VisitHistory::new(1);
        assert_eq!(h.capacity(), 3);
        for i in 0..5 {
            h.record(visit(i as f64, i as f64, 0.0));
        }
        let kept: Vec<f64> = h.visits("d", "f").map(|v| v.arrival.secs()).collect();
        assert_eq!(kept, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn recent_across_servers() {
        let mut h = VisitHistory::new(3);
        for (t, s) in [(1.0, "a"), (2.0, "b"), (3.0, "a"), (4.0, "c"), (5.0, "b")] {
            h.record(VisitRecord {
                device_id: "d".into(),
                fog_server_id: s.into(),
                arrival: SimTime::from_secs(t),
                position: Point::default(),
            });
        }
        h.record(VisitRecord {
            device_id: "e".into(),
            fog_server_id: "a".into(),
            arrival: SimTime::from_secs(9.0),
            position: Point::default(),
        });
        let r: Vec<f64> = h.recent_for_device("d", 3).iter().map(|v| v.arrival.secs()).collect();
        assert_eq!(r, vec![3.0, 4.0, 5.0]);
    }
}
