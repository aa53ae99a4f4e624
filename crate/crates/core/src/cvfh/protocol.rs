use std::collections::{BTreeSet, VecDeque};

use log::debug;
use serde::{Deserialize, Serialize};

use super::CvfhError;
use crate::mobility::Point;
use crate::sim::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapInfo {
    pub ap_id: String,
    pub ip: String,
    pub mac: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub ap_id: String,
    pub position: Point,
    pub range_m: f64,
    pub ip: String,
    pub mac: String,
}

impl AccessPoint {
    pub fn new(index: usize, position: Point, range_m: f64) -> Result<Self, CvfhError> {
        if !(range_m > 0.0) {
            return Err(CvfhError::InvalidConfig(format!(
                "AP range must be positive, got {range_m}"
            )));
        }
        Ok(AccessPoint {
            ap_id: format!("ap-{index:03}"),
            position,
            range_m,
            ip: format!("10.0.{}.{}", index / 256, index % 256),
            mac: format!("02:00:00:00:{:02x}:{:02x}", index / 256, index % 256),
        })
    }

    pub fn tap_info(&self) -> TapInfo {
        TapInfo {
            ap_id: self.ap_id.clone(),
            ip: self.ip.clone(),
            mac: self.mac.clone(),
        }
    }

    pub fn covers(&self, p: Point) -> bool {
        self.position.distance(p) < self.range_m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub vehicle_id: String,
    pub position: Point,
    pub speed_mps: f64,
    /// Unit heading vector.
    pub direction: Point,
    pub sap_id: Option<String>,
    pub tap: Option<TapInfo>,
    pub nav_id: Option<String>,
    pub rssi_window: VecDeque<(SimTime, f64)>,
    pub plr_estimate: f64,
    /// Request ids for which this vehicle overheard a reply.
    pub replies_seen: BTreeSet<u64>,
    pub outstanding_request: Option<u64>,
}

impl VehicleState {
    pub fn new(vehicle_id: impl Into<String>, position: Point, speed_mps: f64, direction: Point) -> Self {
        VehicleState {
            vehicle_id: vehicle_id.into(),
            position,
            speed_mps,
            direction,
            sap_id: None,
            tap: None,
            nav_id: None,
            rssi_window: VecDeque::new(),
            plr_estimate: 0.0,
            replies_seen: BTreeSet::new(),
            outstanding_request: None,
        }
    }

    pub fn tap_id(&self) -> Option<&str> {
        self.tap.as_ref().map(|t| t.ap_id.as_str())
    }

    /// Appends a sample and drops those older than needed to cover `ti_s`.
    pub fn push_rssi(&mut self, t: SimTime, dbm: f64, ti_s: f64) {
        self.rssi_window.push_back((t, dbm));
        let horizon = t.secs() - ti_s - TIME_EPS;
        while self.rssi_window.len() > 1 && self.rssi_window[1].0.secs() <= horizon {
            self.rssi_window.pop_front();
        }
    }

    /// Forgets all handoff progress, keeping the association.
    pub fn clear_handoff(&mut self) {
        self.tap = None;
        self.nav_id = None;
        self.outstanding_request = None;
        self.rssi_window.clear();
    }
}

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponderKind {
    Ap,
    Vehicle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborMessage {
    NeighborReq {
        request_id: u64,
        cv_id: String,
        cv_sap_id: Option<String>,
        cv_position: Point,
        cv_heading: Point,
    },
    NeighborRep {
        request_id: u64,
        responder_id: String,
        responder_kind: ResponderKind,
        tap_info: TapInfo,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HandoffTriggerConfig {
    pub ti_s: f64,
    pub plr_th: f64,
    pub rssi_sample_interval_s: f64,
}

impl Default for HandoffTriggerConfig {
    fn default() -> Self {
        HandoffTriggerConfig {
            ti_s: 0.5,
            plr_th: 0.2,
            rssi_sample_interval_s: 0.1,
        }
    }
}

impl HandoffTriggerConfig {
    pub fn validate(&self) -> Result<(), CvfhError> {
        if !(self.ti_s > 0.0) {
            return Err(CvfhError::InvalidConfig("ti_s must be > 0".into()));
        }
        if !(self.plr_th > 0.0 && self.plr_th < 1.0) {
            return Err(CvfhError::InvalidConfig("plr_th must be in (0, 1)".into()));
        }
        if !(self.rssi_sample_interval_s > 0.0) {
            return Err(CvfhError::InvalidConfig("rssi_sample_interval_s must be > 0".into()));
        }
        Ok(())
    }
}

/// RSSI strictly decreasing over the last `ti_s` and loss above threshold.
/// A window shorter than `ti_s` never triggers.
pub fn detect_trigger(cv: &VehicleState, config: &HandoffTriggerConfig) -> bool {
    let Some(&(last, _)) = cv.rssi_window.back() else {
        return false;
    };
    let from = last.secs() - config.ti_s;
    let Some(&(first, _)) = cv.rssi_window.front() else {
        return false;
    };
    if first.secs() > from + TIME_EPS {
        return false;
    }
    let recent: Vec<f64> = cv
        .rssi_window
        .iter()
        .filter(|(t, _)| t.secs() >= from - TIME_EPS)
        .map(|&(_, r)| r)
        .collect();
    recent.len() >= 2 && recent.windows(2).all(|w| w[1] < w[0]) && cv.plr_estimate > config.plr_th
}

/// Neighbor `nv` may answer `req`: a different SAP, ahead of CV, moving the
/// same way, and no reply to this request overheard yet.
pub fn qualify_neighbor(nv: &VehicleState, req: &NeighborMessage) -> bool {
    let NeighborMessage::NeighborReq {
        request_id,
        cv_sap_id,
        cv_position,
        cv_heading,
        ..
    } = req
    else {
        return false;
    };
    let Some(sap) = &nv.sap_id else {
        return false;
    };
    let rel = Point::new(nv.position.x - cv_position.x, nv.position.y - cv_position.y);
    let ahead = rel.x * cv_heading.x + rel.y * cv_heading.y > 0.0;
    let same_way = nv.direction.x * cv_heading.x + nv.direction.y * cv_heading.y > 0.0;
    cv_sap_id.as_deref() != Some(sap.as_str()) && ahead && same_way && !nv.replies_seen.contains(request_id)
}

/// Reply timer length: lower own loss answers sooner.
pub fn neighbor_timer(nv: &VehicleState, base_delay_s: f64) -> f64 {
    base_delay_s * nv.plr_estimate
}

/// The reply `nv` sends when its timer expires, with the delay until then.
/// `None` when `nv` does not qualify.
pub fn neighbor_reply(
    nv: &VehicleState,
    req: &NeighborMessage,
    aps: &[AccessPoint],
    base_delay_s: f64,
) -> Option<(f64, NeighborMessage)> {
    if !qualify_neighbor(nv, req) {
        return None;
    }
    let NeighborMessage::NeighborReq { request_id, .. } = req else {
        return None;
    };
    let sap = nv.sap_id.as_deref()?;
    let ap = aps.iter().find(|a| a.ap_id == sap)?;
    Some((
        neighbor_timer(nv, base_delay_s),
        NeighborMessage::NeighborRep {
            request_id: *request_id,
            responder_id: nv.vehicle_id.clone(),
            responder_kind: ResponderKind::Vehicle,
            tap_info: ap.tap_info(),
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplyOutcome {
    Accepted,
    /// A reply for this request was already taken.
    Duplicate,
    /// Not the request CV is waiting on.
    Stale,
}

/// First valid reply sets TAP (and NAV when a vehicle answered).
pub fn process_reply(cv: &mut VehicleState, rep: &NeighborMessage) -> Result<ReplyOutcome, CvfhError> {
    let NeighborMessage::NeighborRep {
        request_id,
        responder_id,
        responder_kind,
        tap_info,
    } = rep
    else {
        return Err(CvfhError::UnexpectedMessage("neighbor request delivered as a reply"));
    };
    if tap_info.ap_id.is_empty() || tap_info.ip.is_empty() || tap_info.mac.is_empty() {
        return Err(CvfhError::IncompleteTapInfo(responder_id.clone()));
    }
    if cv.outstanding_request != Some(*request_id) {
        debug!(
            "{}: dropping reply from {responder_id} for stale request {request_id}",
            cv.vehicle_id
        );
        return Ok(ReplyOutcome::Stale);
    }
    if cv.tap.is_some() {
        return Ok(ReplyOutcome::Duplicate);
    }
    cv.tap = Some(tap_info.clone());
    cv.nav_id = match responder_kind {
        ResponderKind::Ap => None,
        ResponderKind::Vehicle => Some(responder_id.clone()),
    };
    Ok(ReplyOutcome::Accepted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecuteDecision {
    Execute,
    /// TAP known but loss is still acceptable or TAP is out of range.
    Defer,
    NoTap,
}

/// Switch when loss against SAP exceeds the threshold and TAP is in range.
pub fn execute_decision(cv: &VehicleState, aps: &[AccessPoint], plr_th: f64) -> ExecuteDecision {
    let Some(tap) = &cv.tap else {
        return ExecuteDecision::NoTap;
    };
    match aps.iter().find(|a| a.ap_id == tap.ap_id) {
        Some(ap) if cv.plr_estimate > plr_th && ap.covers(cv.position) => ExecuteDecision::Execute,
        _ => ExecuteDecision::Defer,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aps() -> Vec<AccessPoint> {
        (0..3)
            .map(|i| AccessPoint::new(i, Point::new(i as f64 * 400.0, 10.0), 250.0).unwrap())
            .collect()
    }

    fn vehicle(id: &str, x: f64, sap: Option<&str>) -> VehicleState {
        let mut v = VehicleState::new(id, Point::new(x, 0.0), 20.0, Point::new(1.0, 0.0));
        v.sap_id = sap.map(String::from);
        v
    }

    fn req(id: u64, x: f64, sap: &str) -> NeighborMessage {
        NeighborMessage::NeighborReq {
            request_id: id,
            cv_id: "cv".into(),
            cv_sap_id: Some(sap.into()),
            cv_position: Point::new(x, 0.0),
            cv_heading: Point::new(1.0, 0.0),
        }
    }

    fn window(v: &mut VehicleState, values: &[f64]) {
        for (i, r) in values.iter().enumerate() {
            v.push_rssi(SimTime::from_secs(i as f64 * 0.1), *r, 0.5);
        }
    }

    #[test]
    fn trigger_needs_decline_and_loss() {
        let cfg = HandoffTriggerConfig::default();
        let mut v = vehicle("cv", 0.0, Some("ap-000"));
        window(&mut v, &[-60.0, -61.0, -62.0, -63.0, -64.0, -65.0]);
        v.plr_estimate = 0.3;
        assert!(detect_trigger(&v, &cfg));
        v.plr_estimate = 0.1;
        assert!(!detect_trigger(&v, &cfg));

        let mut up = vehicle("cv", 0.0, Some("ap-000"));
        window(&mut up, &[-60.0, -61.0, -60.5, -63.0, -64.0, -65.0]);
        up.plr_estimate = 0.3;
        assert!(!detect_trigger(&up, &cfg));

        let mut short = vehicle("cv", 0.0, Some("ap-000"));
        window(&mut short, &[-60.0, -61.0, -62.0]);
        short.plr_estimate = 0.3;
        assert!(!detect_trigger(&short, &cfg));
    }

    #[test]
    fn old_uptick_outside_window_is_ignored() {
        let cfg = HandoffTriggerConfig::default();
        let mut v = vehicle("cv", 0.0, Some("ap-000"));
        window(&mut v, &[-70.0, -60.0, -61.0, -62.0, -63.0, -64.0, -65.0]);
        v.plr_estimate = 0.3;
        assert!(detect_trigger(&v, &cfg));
    }

    #[test]
    fn qualification_rules() {
        let r = req(1, 200.0, "ap-000");
        assert!(!qualify_neighbor(&vehicle("n", 300.0, Some("ap-000")), &r));
        assert!(!qualify_neighbor(&vehicle("n", 100.0, Some("ap-001")), &r));
        assert!(qualify_neighbor(&vehicle("n", 300.0, Some("ap-001")), &r));
        let mut seen = vehicle("n", 300.0, Some("ap-001"));
        seen.replies_seen.insert(1);
        assert!(!qualify_neighbor(&seen, &r));
        let mut oncoming = vehicle("n", 300.0, Some("ap-001"));
        oncoming.direction = Point::new(-1.0, 0.0);
        assert!(!qualify_neighbor(&oncoming, &r));
        assert!(!qualify_neighbor(&vehicle("n", 300.0, None), &r));
    }

    #[test]
    fn lower_loss_neighbor_answers_first() {
        let r = req(1, 200.0, "ap-000");
        let mut a = vehicle("a", 300.0, Some("ap-001"));
        a.plr_estimate = 0.1;
        let mut b = vehicle("b", 320.0, Some("ap-001"));
        b.plr_estimate = 0.3;
        let (ta, _) = neighbor_reply(&a, &r, &aps(), 0.01).unwrap();
        let (tb, _) = neighbor_reply(&b, &r, &aps(), 0.01).unwrap();
        assert!(ta < tb);
    }

    #[test]
    fn reply_handling() {
        let mut cv = vehicle("cv", 200.0, Some("ap-000"));
        cv.outstanding_request = Some(4);
        let a = aps();
        let from_ap = NeighborMessage::NeighborRep {
            request_id: 4,
            responder_id: a[2].ap_id.clone(),
            responder_kind: ResponderKind::Ap,
            tap_info: a[2].tap_info(),
        };
        assert_eq!(process_reply(&mut cv, &from_ap).unwrap(), ReplyOutcome::Accepted);
        assert_eq!(cv.tap_id(), Some("ap-002"));
        assert_eq!(cv.tap.as_ref().unwrap().ip, a[2].ip);
        assert!(cv.nav_id.is_none());
        let second = NeighborMessage::NeighborRep {
            request_id: 4,
            responder_id: "v12".into(),
            responder_kind: ResponderKind::Vehicle,
            tap_info: a[1].tap_info(),
        };
        assert_eq!(process_reply(&mut cv, &second).unwrap(), ReplyOutcome::Duplicate);
        assert_eq!(cv.tap_id(), Some("ap-002"));

        let mut cv2 = vehicle("cv2", 200.0, Some("ap-000"));
        cv2.outstanding_request = Some(9);
        assert_eq!(process_reply(&mut cv2, &second).unwrap(), ReplyOutcome::Stale);
        cv2.outstanding_request = Some(4);
        assert_eq!(process_reply(&mut cv2, &second).unwrap(), ReplyOutcome::Accepted);
        assert_eq!(cv2.nav_id.as_deref(), Some("v12"));
        assert_eq!(cv2.tap_id(), Some("ap-001"));
    }

    #[test]
    fn execution_waits_for_range_and_loss() {
        let a = aps();
        let mut cv = vehicle("cv", 100.0, Some("ap-000"));
        assert_eq!(execute_decision(&cv, &a, 0.2), ExecuteDecision::NoTap);
        cv.tap = Some(a[1].tap_info());
        cv.plr_estimate = 0.5;
        assert_eq!(execute_decision(&cv, &a, 0.2), ExecuteDecision::Defer);
        cv.position = Point::new(220.0, 0.0);
        assert_eq!(execute_decision(&cv, &a, 0.2), ExecuteDecision::Execute);
        cv.plr_estimate = 0.1;
        assert_eq!(execute_decision(&cv, &a, 0.2), ExecuteDecision::Defer);
    }
}
