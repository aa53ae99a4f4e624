use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{CloudTables, Content, FogRouteError};
use crate::mobility::{average_speed_and_direction, estimated_delivery_time, DeviceKind};
use crate::sim::SimTime;

/// One device considered for carrying a content to a target fog server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub device_id: String,
    pub scheduled: bool,
    /// Completed contacts with the target.
    pub contact_frequency: u32,
    /// Mean contact duration with the target, seconds.
    pub mean_connection_s: f64,
    /// Predicted time to reach the target, seconds. `None` when it cannot be
    /// estimated (no visit history, not approaching, not on the timetable).
    pub delivery_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierAssignment {
    pub content_id: String,
    pub target_fog_id: String,
    pub scheduled: Vec<String>,
    pub non_scheduled: Vec<String>,
}

impl CarrierAssignment {
    pub fn len(&self) -> usize {
        self.scheduled.len() + self.non_scheduled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn devices(&self) -> impl Iterator<Item = &String> {
        self.scheduled.iter().chain(&self.non_scheduled)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionPolicy {
    pub uplink_bytes_per_s: f64,
    /// Drop non-scheduled devices slower than `T_d` before ranking.
    pub prefilter_non_scheduled_by_deadline: bool,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy {
            uplink_bytes_per_s: 1_000_000.0,
            prefilter_non_scheduled_by_deadline: false,
        }
    }
}

/// Delivery probability of candidate `m`: its share of the contact frequency
/// times one minus its share of the total delivery time. When every delivery
/// time is zero the second factor is taken as 1.
pub fn delivery_probability(contact_frequency: &[f64], delivery_time: &[f64], m: usize) -> Result<f64, FogRouteError> {
    if contact_frequency.len() != delivery_time.len() || m >= contact_frequency.len() {
        return Err(FogRouteError::InvalidCandidates(
            "mismatched or out-of-range candidate index".into(),
        ));
    }
    let total_freq: f64 = contact_frequency.iter().sum();
    if !(total_freq > 0.0) {
        return Err(FogRouteError::InvalidCandidates(
            "total contact frequency is zero".into(),
        ));
    }
    if delivery_time.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(FogRouteError::InvalidCandidates(
            "delivery times must be finite and >= 0".into(),
        ));
    }
    let total_time: f64 = delivery_time.iter().sum();
    let time_factor = if total_time > 0.0 {
        1.0 - delivery_time[m] / total_time
    } else {
        1.0
    };
    Ok(contact_frequency[m] / total_freq * time_factor)
}

/// Carrier selection over a prepared candidate list.
///
/// Steps: keep devices whose mean contact with the target outlasts the upload;
/// scheduled devices due within `T_d` are taken outright; non-scheduled ones
/// are ranked by delivery probability (ties to the lower id) and admitted
/// greedily while the mean delivery time of everything chosen stays below
/// `T_d`. A lone non-scheduled survivor is admitted iff it is due within `T_d`.
pub fn select_carriers_from(
    target_fog_id: &str,
    content: &Content,
    candidates: &[Candidate],
    policy: &SelectionPolicy,
) -> Result<CarrierAssignment, FogRouteError> {
    let t_d = content.affordable_delay_s;
    let upload = content.upload_time(policy.uplink_bytes_per_s);
    let kept: Vec<&Candidate> = candidates.iter().filter(|c| c.mean_connection_s > upload).collect();
    if kept.is_empty() {
        return Err(FogRouteError::NoEligibleCarriers);
    }

    let mut scheduled: Vec<(&str, f64)> = kept
        .iter()
        .filter(|c| c.scheduled)
        .filter_map(|c| {
            c.delivery_time_s
                .filter(|d| *d <= t_d)
                .map(|d| (c.device_id.as_str(), d))
        })
        .collect();
    scheduled.sort_by(|a, b| a.0.cmp(b.0));

    let pool: Vec<(&str, f64, f64)> = kept
        .iter()
        .filter(|c| !c.scheduled)
        .filter_map(|c| {
            c.delivery_time_s
                .filter(|d| d.is_finite() && (!policy.prefilter_non_scheduled_by_deadline || *d <= t_d))
                .map(|d| (c.device_id.as_str(), f64::from(c.contact_frequency), d))
        })
        .collect();

    let mut non_scheduled = Vec::new();
    if pool.len() == 1 {
        if pool[0].2 <= t_d {
            non_scheduled.push(pool[0].0.to_string());
        }
    } else if pool.len() > 1 {
        let freq: Vec<f64> = pool.iter().map(|p| p.1).collect();
        let time: Vec<f64> = pool.iter().map(|p| p.2).collect();
        let mut ranked: Vec<(f64, &str, f64)> = Vec::with_capacity(pool.len());
        for (i, p) in pool.iter().enumerate() {
            ranked.push((delivery_probability(&freq, &time, i)?, p.0, p.2));
        }
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));

        let mut sum: f64 = scheduled.iter().map(|s| s.1).sum();
        for (count, (_, id, d)) in (scheduled.len() + 1..).zip(ranked) {
            if (sum + d) / count as f64 >= t_d {
                break;
            }
            sum += d;
            non_scheduled.push(id.to_string());
        }
    }

    if scheduled.is_empty() && non_scheduled.is_empty() {
        return Err(FogRouteError::EmptyAssignment);
    }
    Ok(CarrierAssignment {
        content_id: content.content_id.clone(),
        target_fog_id: target_fog_id.to_string(),
        scheduled: scheduled.into_iter().map(|s| s.0.to_string()).collect(),
        non_scheduled,
    })
}

/// Builds the candidate list from the cloud tables: devices last reported at a
/// server holding the newest version, described by their history with the
/// target.
pub fn gather_candidates(tables: &CloudTables, target_fog_id: &str, content_id: &str, now: SimTime) -> Vec<Candidate> {
    let Some(target) = tables.fs.get(target_fog_id) else {
        return Vec::new();
    };
    let target_pos = target.position;
    let devices: BTreeSet<&String> = tables
        .holders(content_id, target_fog_id)
        .iter()
        .filter_map(|h| tables.fs.get(h))
        .flat_map(|f| f.mobile_device_ids.iter())
        .collect();

    devices
        .into_iter()
        .map(|device_id| {
            let row = tables.mdmp_row(device_id, target_fog_id);
            let timetable = match tables.device_kinds.get(device_id) {
                Some(DeviceKind::Scheduled(tt)) if tt.serves(target_fog_id) => Some(tt),
                _ => None,
            };
            let delivery_time_s = match timetable {
                Some(tt) => tt.next_arrival(target_fog_id, now.secs()).map(|t| t - now.secs()),
                None => {
                    let recent = tables.visits.recent_for_device(device_id, 3);
                    let position = tables.device_positions.get(device_id).map(|p| p.1);
                    match (average_speed_and_direction(&recent, target_pos), position) {
                        (Ok(est), Some(pos)) => {
                            let d = match est.heading {
                                Some(h) => estimated_delivery_time(pos, h, est.speed, target_pos),
                                None if pos == target_pos => 0.0,
                                None => f64::INFINITY,
                            };
                            Some(d).filter(|d| d.is_finite())
                        }
                        _ => None,
                    }
                }
            };
            Candidate {
                device_id: device_id.clone(),
                scheduled: timetable.is_some(),
                contact_frequency: row.map_or(0, |r| r.contact_count),
                mean_connection_s: row.map_or(0.0, |r| r.mean_connection_s()),
                delivery_time_s,
            }
        })
        .collect()
}

/// Candidate gathering followed by [`select_carriers_from`].
pub fn select_carriers(
    tables: &CloudTables,
    target_fog_id: &str,
    content_id: &str,
    now: SimTime,
    policy: &SelectionPolicy,
) -> Result<CarrierAssignment, FogRouteError> {
    let content = tables
        .catalog
        .get(content_id)
        .ok_or_else(|| FogRouteError::UnknownContent(content_id.to_string()))?;
    let candidates = gather_candidates(tables, target_fog_id, content_id, now);
    select_carriers_from(target_fog_id, content, &candidates, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn content(t_d: f64) -> Content {
        Content {
            content_id: "c".into(),
            size_bytes: 1_000_000,
            affordable_delay_s: t_d,
            date_of_update: SimTime::ZERO,
            validation_time_s: 0.0,
        }
    }

    fn cand(id: &str, scheduled: bool, freq: u32, time: Option<f64>) -> Candidate {
        Candidate {
            device_id: id.into(),
            scheduled,
            contact_frequency: freq,
            mean_connection_s: 100.0,
            delivery_time_s: time,
        }
    }

    #[test]
    fn selection_score_values() {
        let p = delivery_probability(&[1.0, 1.0], &[1.0, 1.0], 0).unwrap();
        assert_eq!(p, 0.25);
        assert_eq!(delivery_probability(&[4.0], &[2.0], 0).unwrap(), 0.0);
        let p = delivery_probability(&[3.0, 2.0, 1.0], &[1.0, 2.0, 3.0], 0).unwrap();
        assert!((p - 5.0 / 12.0).abs() < 1e-15);
        assert!(delivery_probability(&[0.0, 0.0], &[1.0, 1.0], 0).is_err());
    }

    #[test]
    fn prefix_admits_while_mean_stays_below_deadline() {
        let cands = [
            cand("bus", true, 1, Some(2.0)),
            cand("n1", false, 3, Some(1.0)),
            cand("n2", false, 2, Some(3.0)),
            cand("n3", false, 1, Some(5.0)),
        ];
        let a = select_carriers_from("t", &content(3.0), &cands, &SelectionPolicy::default()).unwrap();
        assert_eq!(a.scheduled, vec!["bus"]);
        assert_eq!(a.non_scheduled, vec!["n1", "n2", "n3"]);
    }

    #[test]
    fn greedy_stops_at_first_violation() {
        let cands = [cand("a", false, 10, Some(9.0)), cand("b", false, 1, Some(1.0))];
        // a ranks first (10/11 * 0.1 > 1/11 * 0.9) but alone misses the deadline.
        let r = select_carriers_from("t", &content(5.0), &cands, &SelectionPolicy::default());
        assert!(matches!(r, Err(FogRouteError::EmptyAssignment)));
    }

    #[test]
    fn short_contacts_are_filtered() {
        let mut c = cand("a", false, 1, Some(1.0));
        c.mean_connection_s = 0.5;
        let r = select_carriers_from("t", &content(10.0), &[c], &SelectionPolicy::default());
        assert!(matches!(r, Err(FogRouteError::NoEligibleCarriers)));
    }

    #[test]
    fn ties_go_to_lower_id() {
        let cands = [cand("b", false, 1, Some(1.0)), cand("a", false, 1, Some(1.0))];
        let a = select_carriers_from("t", &content(10.0), &cands, &SelectionPolicy::default()).unwrap();
        assert_eq!(a.non_scheduled, vec!["a", "b"]);
    }

    #[test]
    fn singleton_rule() {
        let ok = select_carriers_from(
            "t",
            &content(10.0),
            &[cand("a", false, 1, Some(10.0))],
            &SelectionPolicy::default(),
        )
        .unwrap();
        assert_eq!(ok.non_scheduled, vec!["a"]);
        let late = select_carriers_from(
            "t",
            &content(10.0),
            &[cand("a", false, 1, Some(11.0))],
            &SelectionPolicy::default(),
        );
        assert!(late.is_err());
    }

    #[test]
    fn late_scheduled_devices_are_dropped() {
        let cands = [cand("bus", true, 1, Some(20.0)), cand("n", false, 1, Some(2.0))];
        let a = select_carriers_from("t", &content(10.0), &cands, &SelectionPolicy::default()).unwrap();
        assert!(a.scheduled.is_empty());
        assert_eq!(a.non_scheduled, vec!["n"]);
    }
}
