use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    detect_trigger, execute_decision, handoff_80211, handoff_cvfh, neighbor_reply, plr_model, process_reply,
    rssi_model, AccessPoint, CvfhError, ExecuteDecision, HandoffResult, HandoffTriggerConfig, LatencyBreakdown,
    LinkParams, NeighborMessage, PacketCounts, PlrEstimator, PlrMode, RadioConfig, ReplyOutcome, ResponderKind,
    VehicleState,
};
use crate::metrics::{HandoffSample, Scheme, ThroughputRecord};
use crate::mobility::{sample_highway, HighwayFlowParams, Point};
use crate::sim::{EventHandle, RngStream, SimTime, Simulation};

/// Straight road along +x with access points every `ap_spacing_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvfhConfig {
    pub road_length_m: f64,
    pub ap_spacing_m: f64,
    pub ap_range_m: f64,
    /// Lateral distance of access points from the road.
    pub ap_offset_m: f64,
    pub v2v_range_m: f64,
    pub radio: RadioConfig,
    /// Loss model for application packets.
    pub data_plr: PlrMode,
    pub link: LinkParams,
    pub trigger: HandoffTriggerConfig,
    pub neighbor_base_delay_s: f64,
    /// An unanswered neighbor request is repeated after this long.
    pub request_timeout_s: f64,
    pub plr_ewma_weight: f64,
    /// Probability that an access point in range answers a neighbor request.
    pub p_ap: f64,
    pub lambda_per_m: f64,
    pub background_speed_min_mps: f64,
    pub background_speed_max_mps: f64,
    /// Probability that a background vehicle drives the other way.
    pub p0: f64,
    pub cv_count: usize,
    pub cv_spacing_m: f64,
    pub cv_speed_mps: f64,
    pub packet_rate_pps: f64,
    pub packet_size_bytes: u64,
    pub duration_s: f64,
}

impl Default for CvfhConfig {
    fn default() -> Self {
        CvfhConfig {
            road_length_m: 3000.0,
            ap_spacing_m: 480.0,
            ap_range_m: 250.0,
            ap_offset_m: 10.0,
            v2v_range_m: 300.0,
            radio: RadioConfig::default(),
            data_plr: PlrMode::default(),
            link: LinkParams::default(),
            trigger: HandoffTriggerConfig::default(),
            neighbor_base_delay_s: 0.01,
            request_timeout_s: 0.1,
            plr_ewma_weight: 0.1,
            p_ap: 1.0,
            lambda_per_m: 0.01,
            background_speed_min_mps: 40.0 / 3.6,
            background_speed_max_mps: 90.0 / 3.6,
            p0: 0.3,
            cv_count: 10,
            cv_spacing_m: 40.0,
            cv_speed_mps: 70.0 / 3.6,
            packet_rate_pps: 100.0,
            packet_size_bytes: 1000,
            duration_s: 300.0,
        }
    }
}

impl CvfhConfig {
    pub fn validate(&self) -> Result<(), CvfhError> {
        let bad = |m: String| Err(CvfhError::InvalidConfig(m));
        for (name, v) in [
            ("road_length_m", self.road_length_m),
            ("ap_spacing_m", self.ap_spacing_m),
            ("ap_range_m", self.ap_range_m),
            ("v2v_range_m", self.v2v_range_m),
            ("cv_speed_mps", self.cv_speed_mps),
            ("packet_rate_pps", self.packet_rate_pps),
            ("duration_s", self.duration_s),
            ("request_timeout_s", self.request_timeout_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.ap_offset_m.abs() < self.ap_range_m) {
            return bad("ap_offset_m must be smaller than ap_range_m".into());
        }
        if !(self.plr_ewma_weight > 0.0 && self.plr_ewma_weight <= 1.0) {
            return bad("plr_ewma_weight must be in (0, 1]".into());
        }
        for (name, v) in [("p_ap", self.p_ap), ("p0", self.p0)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1]"));
            }
        }
        if !(self.neighbor_base_delay_s >= 0.0) {
            return bad("neighbor_base_delay_s must be >= 0".into());
        }
        if self.cv_count == 0 {
            return bad("cv_count must be >= 1".into());
        }
        match self.data_plr {
            PlrMode::Ramp { p_min: p } | PlrMode::Constant { pe: p } if !(0.0..=1.0).contains(&p) => {
                return bad("data_plr probability must be in [0, 1]".into())
            }
            _ => {}
        }
        self.trigger.validate()?;
        self.link.validate()
    }

    pub fn access_points(&self) -> Result<Vec<AccessPoint>, CvfhError> {
        let count = (self.road_length_m / self.ap_spacing_m).floor() as usize + 1;
        (0..count)
            .map(|i| {
                AccessPoint::new(
                    i,
                    Point::new(i as f64 * self.ap_spacing_m, self.ap_offset_m),
                    self.ap_range_m,
                )
            })
            .collect()
    }

    fn flow(&self) -> HighwayFlowParams {
        HighwayFlowParams {
            lambda_per_m: self.lambda_per_m,
            speed_min_mps: self.background_speed_min_mps,
            speed_max_mps: self.background_speed_max_mps,
            opposite_prob: self.p0,
            road_length_m: self.road_length_m + 2.0 * BACKGROUND_MARGIN_M,
        }
    }
}

/// Background traffic extends this far past both road ends.
const BACKGROUND_MARGIN_M: f64 = 1000.0;
const OPPOSITE_LANE_Y: f64 = -4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct NeighborStats {
    pub requests: u64,
    pub replies_sent: u64,
    pub replies_suppressed: u64,
    pub accepted: u64,
    pub duplicates: u64,
    pub stale: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HighwayOutcome {
    pub scheme: Scheme,
    pub handoffs: Vec<HandoffResult>,
    pub throughput: Vec<ThroughputRecord>,
    pub packets_sent: u64,
    pub packets_delivered: u64,
    pub neighbor: NeighborStats,
    pub events_processed: u64,
}

impl HighwayOutcome {
    pub fn handoff_samples(&self, config: &CvfhConfig) -> Vec<HandoffSample> {
        self.handoffs
            .iter()
            .map(|h| HandoffSample {
                scheme: h.scheme,
                speed_mps: config.cv_speed_mps,
                packet_rate: config.packet_rate_pps,
                delay_s: h.delay_s(),
                success: h.success,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Responder {
    Background(usize),
    Ap(usize),
}

#[derive(Debug, Clone)]
enum Event {
    Tick,
    LinkLost {
        cv: usize,
    },
    Reassociate {
        cv: usize,
    },
    ReplyTimer {
        cv: usize,
        responder: Responder,
        rep: NeighborMessage,
    },
    ReplyArrive {
        cv: usize,
        rep: NeighborMessage,
    },
    HandoffDone {
        cv: usize,
        ap: usize,
    },
}

#[derive(Debug, Clone)]
struct Outage {
    start: SimTime,
    success: bool,
    latency: LatencyBreakdown,
    packets: PacketCounts,
    waiting_since: Option<SimTime>,
}

struct Background {
    x0: f64,
    sign: f64,
    speed: f64,
    replies_seen: BTreeSet<u64>,
}

impl Background {
    fn position(&self, t: f64) -> Point {
        let y = if self.sign > 0.0 { 0.0 } else { OPPOSITE_LANE_Y };
        Point::new(self.x0 + self.sign * self.speed * t, y)
    }
}

struct Cv {
    state: VehicleState,
    x0: f64,
    /// Association as a step function of time.
    assoc: Vec<(f64, Option<usize>)>,
    plr: PlrEstimator,
    outage: Option<Outage>,
    link_lost: Option<EventHandle>,
    request_sent_at: f64,
    next_packet: u64,
    bits: u64,
    data_rng: RngStream,
    ctl_rng: RngStream,
}

impl Cv {
    fn current_ap(&self) -> Option<usize> {
        self.assoc.last().and_then(|&(_, a)| a)
    }

    fn ap_at(&self, t: f64) -> Option<usize> {
        let i = self.assoc.partition_point(|&(from, _)| from <= t);
        if i == 0 {
            None
        } else {
            self.assoc[i - 1].1
        }
    }
}

struct Highway<'a> {
    config: &'a CvfhConfig,
    scheme: Scheme,
    aps: Vec<AccessPoint>,
    cvs: Vec<Cv>,
    background: Vec<Background>,
    pending_replies: BTreeMap<u64, Vec<(EventHandle, Responder)>>,
    next_request: u64,
    results: Vec<HandoffResult>,
    stats: NeighborStats,
    packets_sent: u64,
    packets_delivered: u64,
}

impl Highway<'_> {
    fn cv_position(&self, cv: usize, t: f64) -> Point {
        Point::new(self.cvs[cv].x0 + self.config.cv_speed_mps * t, 0.0)
    }

    /// Half-width of an AP's coverage along the road.
    fn half_chord(&self) -> f64 {
        (self.config.ap_range_m.powi(2) - self.config.ap_offset_m.powi(2)).sqrt()
    }

    fn nearest_covering(&self, p: Point, exclude: Option<usize>) -> Option<usize> {
        self.aps
            .iter()
            .enumerate()
            .filter(|(i, a)| Some(*i) != exclude && a.covers(p))
            .min_by(|(_, a), (_, b)| a.position.distance(p).total_cmp(&b.position.distance(p)))
            .map(|(i, _)| i)
    }

    fn flush_packets(&mut self, cv: usize, now: SimTime) {
        let rate = self.config.packet_rate_pps;
        let bits = self.config.packet_size_bytes * 8;
        loop {
            let c = &self.cvs[cv];
            let t = c.next_packet as f64 / rate;
            if t > now.secs() {
                break;
            }
            let ap = c.ap_at(t);
            let pos = self.cv_position(cv, t);
            let c = &mut self.cvs[cv];
            c.next_packet += 1;
            self.packets_sent += 1;
            if let Some(ap) = ap {
                let d = self.aps[ap].position.distance(pos);
                let lost = c
                    .data_rng
                    .random_bool(plr_model(d, self.aps[ap].range_m, self.config.data_plr));
                c.plr.observe(lost);
                if !lost {
                    c.bits += bits;
                    self.packets_delivered += 1;
                }
            }
        }
    }

    fn associate(&mut self, sim: &mut Simulation<Event>, cv: usize, ap: usize) -> Result<(), CvfhError> {
        let now = sim.now();
        let exit_x = self.aps[ap].position.x + self.half_chord();
        let exit_t = (exit_x - self.cvs[cv].x0) / self.config.cv_speed_mps;
        let c = &mut self.cvs[cv];
        c.assoc.push((now.secs(), Some(ap)));
        c.plr.reset();
        c.state.sap_id = Some(self.aps[ap].ap_id.clone());
        c.state.clear_handoff();
        c.link_lost = if exit_t <= self.config.duration_s {
            Some(sim.schedule(SimTime::from_secs(exit_t.max(now.secs())), Event::LinkLost { cv })?)
        } else {
            None
        };
        Ok(())
    }

    fn start_outage(&mut self, cv: usize, now: SimTime) {
        let c = &mut self.cvs[cv];
        c.assoc.push((now.secs(), None));
        c.state.sap_id = None;
        c.state.clear_handoff();
        c.outage = Some(Outage {
            start: now,
            success: true,
            latency: LatencyBreakdown::default(),
            packets: PacketCounts::default(),
            waiting_since: None,
        });
    }

    /// Full 802.11 association to the nearest AP in range, or wait for one.
    fn reassociate(&mut self, sim: &mut Simulation<Event>, cv: usize, exclude: Option<usize>) -> Result<(), CvfhError> {
        let now = sim.now();
        let pos = self.cv_position(cv, now.secs());
        let fallback = self.scheme == Scheme::Cvfh;
        let outage = self.cvs[cv]
            .outage
            .as_mut()
            .expect("reassociation happens inside an outage");
        if let Some(since) = outage.waiting_since.take() {
            outage.latency.waiting_s += now - since;
        }
        let Some(ap) = self.nearest_covering(pos, exclude) else {
            let h = self.half_chord();
            let entry = self
                .aps
                .iter()
                .map(|a| a.position.x - h)
                .filter(|x| *x > pos.x)
                .min_by(f64::total_cmp)
                .map(|x| (x - self.cvs[cv].x0) / self.config.cv_speed_mps + 1e-6);
            let outage = self.cvs[cv].outage.as_mut().expect("inside an outage");
            outage.waiting_since = Some(now);
            if let Some(t) = entry.filter(|t| *t <= self.config.duration_s) {
                sim.schedule(SimTime::from_secs(t), Event::Reassociate { cv })?;
            }
            return Ok(());
        };
        let c = &mut self.cvs[cv];
        let r = handoff_80211(&c.state.vehicle_id, now, &self.config.link, &mut c.ctl_rng);
        let outage = c.outage.as_mut().expect("inside an outage");
        outage.packets.v2i += r.packets_exchanged.v2i;
        if fallback {
            outage.latency.fallback_s += r.latency.total();
        } else {
            outage.latency.wireless_s += r.latency.wireless_s;
            outage.latency.auth_s += r.latency.auth_s;
            outage.latency.assoc_s += r.latency.assoc_s;
        }
        if r.success {
            sim.schedule(r.completion_time, Event::HandoffDone { cv, ap })?;
        } else {
            outage.success = false;
            sim.schedule(r.completion_time, Event::Reassociate { cv })?;
        }
        Ok(())
    }

    fn execute_cvfh(&mut self, sim: &mut Simulation<Event>, cv: usize) -> Result<(), CvfhError> {
        let now = sim.now();
        let c = &self.cvs[cv];
        let tap = c.state.tap.as_ref().expect("execution requires a TAP").ap_id.clone();
        let via = if c.state.nav_id.is_some() {
            ResponderKind::Vehicle
        } else {
            ResponderKind::Ap
        };
        let tap_idx = self
            .aps
            .iter()
            .position(|a| a.ap_id == tap)
            .ok_or(CvfhError::UnknownAp(tap))?;
        if let Some(h) = self.cvs[cv].link_lost.take() {
            sim.cancel(h);
        }
        self.start_outage(cv, now);
        let c = &mut self.cvs[cv];
        let r = handoff_cvfh(&c.state.vehicle_id, now, via, &self.config.link, &mut c.ctl_rng);
        let outage = c.outage.as_mut().expect("outage just started");
        outage.latency.wireless_s += r.latency.wireless_s;
        outage.packets.v2v += r.packets_exchanged.v2v;
        outage.packets.v2i += r.packets_exchanged.v2i;
        if r.success {
            sim.schedule(r.completion_time, Event::HandoffDone { cv, ap: tap_idx })?;
        } else {
            outage.success = false;
            sim.schedule(r.completion_time, Event::Reassociate { cv })?;
        }
        Ok(())
    }

    fn send_request(&mut self, sim: &mut Simulation<Event>, cv: usize) -> Result<(), CvfhError> {
        let now = sim.now();
        let request_id = self.next_request;
        self.next_request += 1;
        self.stats.requests += 1;
        let c = &mut self.cvs[cv];
        c.state.outstanding_request = Some(request_id);
        c.request_sent_at = now.secs();
        let cv_pos = c.state.position;
        let sap = c.current_ap();
        let req = NeighborMessage::NeighborReq {
            request_id,
            cv_id: c.state.vehicle_id.clone(),
            cv_sap_id: c.state.sap_id.clone(),
            cv_position: cv_pos,
            cv_heading: c.state.direction,
        };
        let link = self.config.link;
        let mut timers = Vec::new();
        for (i, bg) in self.background.iter().enumerate() {
            let pos = bg.position(now.secs());
            if pos.distance(cv_pos) > self.config.v2v_range_m {
                continue;
            }
            if self.cvs[cv].ctl_rng.random_bool(link.pe_vv) {
                continue;
            }
            let nv = self.background_state(i, now.secs());
            if let Some((delay, rep)) = neighbor_reply(&nv, &req, &self.aps, self.config.neighbor_base_delay_s) {
                timers.push((link.t_pkt_vv_s + delay, Responder::Background(i), rep));
            }
        }
        for (i, ap) in self.aps.iter().enumerate() {
            if Some(i) == sap || !ap.covers(cv_pos) {
                continue;
            }
            let rng = &mut self.cvs[cv].ctl_rng;
            if !rng.random_bool(self.config.p_ap) || rng.random_bool(link.pe_vi) {
                continue;
            }
            let plr = plr_model(ap.position.distance(cv_pos), ap.range_m, self.config.data_plr);
            let rep = NeighborMessage::NeighborRep {
                request_id,
                responder_id: ap.ap_id.clone(),
                responder_kind: ResponderKind::Ap,
                tap_info: ap.tap_info(),
            };
            timers.push((
                link.t_pkt_vi_s + self.config.neighbor_base_delay_s * plr,
                Responder::Ap(i),
                rep,
            ));
        }
        let mut handles = Vec::with_capacity(timers.len());
        for (delay, responder, rep) in timers {
            let h = sim.schedule_in(delay, Event::ReplyTimer { cv, responder, rep })?;
            handles.push((h, responder));
        }
        if !handles.is_empty() {
            self.pending_replies.insert(request_id, handles);
        }
        Ok(())
    }

    fn background_state(&self, i: usize, t: f64) -> VehicleState {
        let bg = &self.background[i];
        let pos = bg.position(t);
        let mut v = VehicleState::new(format!("bg-{i:04}"), pos, bg.speed, Point::new(bg.sign, 0.0));
        if let Some(ap) = self.nearest_covering(pos, None) {
            v.sap_id = Some(self.aps[ap].ap_id.clone());
            // Background vehicles are not packet-simulated; their loss
            // estimate is the model value at their position.
            v.plr_estimate = plr_model(
                self.aps[ap].position.distance(pos),
                self.aps[ap].range_m,
                self.config.data_plr,
            );
        }
        v.replies_seen = bg.replies_seen.clone();
        v
    }

    fn responder_position(&self, r: Responder, t: f64) -> (Point, f64) {
        match r {
            Responder::Background(i) => (self.background[i].position(t), self.config.v2v_range_m),
            Responder::Ap(i) => (self.aps[i].position, self.aps[i].range_m),
        }
    }

    fn on_reply_timer(
        &mut self,
        sim: &mut Simulation<Event>,
        cv: usize,
        responder: Responder,
        rep: NeighborMessage,
    ) -> Result<(), CvfhError> {
        let now = sim.now();
        let NeighborMessage::NeighborRep { request_id, .. } = &rep else {
            return Err(CvfhError::UnexpectedMessage("request scheduled as a reply"));
        };
        let request_id = *request_id;
        self.stats.replies_sent += 1;
        let (origin, reach) = self.responder_position(responder, now.secs());
        let others = self.pending_replies.remove(&request_id).unwrap_or_default();
        let mut still_pending = Vec::new();
        for (h, other) in others {
            if other == responder || !sim.is_pending(h) {
                continue;
            }
            let (p, _) = self.responder_position(other, now.secs());
            if p.distance(origin) <= reach {
                sim.cancel(h);
                self.stats.replies_suppressed += 1;
                if let Responder::Background(i) = other {
                    self.background[i].replies_seen.insert(request_id);
                }
            } else {
                still_pending.push((h, other));
            }
        }
        if !still_pending.is_empty() {
            self.pending_replies.insert(request_id, still_pending);
        }
        let (t_pkt, pe) = match responder {
            Responder::Background(_) => (self.config.link.t_pkt_vv_s, self.config.link.pe_vv),
            Responder::Ap(_) => (self.config.link.t_pkt_vi_s, self.config.link.pe_vi),
        };
        if !self.cvs[cv].ctl_rng.random_bool(pe) {
            sim.schedule_in(t_pkt, Event::ReplyArrive { cv, rep })?;
        }
        Ok(())
    }

    fn on_tick(&mut self, sim: &mut Simulation<Event>) -> Result<(), CvfhError> {
        let now = sim.now();
        for cv in 0..self.cvs.len() {
            self.flush_packets(cv, now);
            let pos = self.cv_position(cv, now.secs());
            let c = &mut self.cvs[cv];
            c.state.position = pos;
            c.state.plr_estimate = c.plr.value();
            if c.outage.is_some() || self.scheme != Scheme::Cvfh {
                continue;
            }
            let Some(sap) = c.current_ap() else {
                continue;
            };
            let d = self.aps[sap].position.distance(pos);
            c.state.push_rssi(
                now,
                rssi_model(d.max(1e-3), &self.config.radio)?,
                self.config.trigger.ti_s,
            );
            match execute_decision(&c.state, &self.aps, self.config.trigger.plr_th) {
                ExecuteDecision::Execute => self.execute_cvfh(sim, cv)?,
                ExecuteDecision::Defer => {}
                ExecuteDecision::NoTap => {
                    let waiting = c.state.outstanding_request.is_some()
                        && now.secs() - c.request_sent_at < self.config.request_timeout_s;
                    if !waiting && detect_trigger(&c.state, &self.config.trigger) {
                        self.send_request(sim, cv)?;
                    }
                }
            }
        }
        let next = now + self.config.trigger.rssi_sample_interval_s;
        if next.secs() <= self.config.duration_s {
            sim.schedule(next, Event::Tick)?;
        }
        Ok(())
    }

    fn handle(&mut self, sim: &mut Simulation<Event>, event: Event) -> Result<(), CvfhError> {
        let now = sim.now();
        match event {
            Event::Tick => self.on_tick(sim)?,
            Event::LinkLost { cv } => {
                self.cvs[cv].link_lost = None;
                self.flush_packets(cv, now);
                let lost = self.cvs[cv].current_ap();
                let pos = self.cv_position(cv, now.secs());
                self.cvs[cv].state.position = pos;
                self.cvs[cv].state.plr_estimate = 1.0;
                let tap_ready = self.scheme == Scheme::Cvfh
                    && execute_decision(&self.cvs[cv].state, &self.aps, self.config.trigger.plr_th)
                        == ExecuteDecision::Execute;
                if tap_ready {
                    self.execute_cvfh(sim, cv)?;
                } else {
                    self.start_outage(cv, now);
                    if self.scheme == Scheme::Cvfh {
                        self.cvs[cv].outage.as_mut().expect("just started").success = false;
                    }
                    self.reassociate(sim, cv, lost)?;
                }
            }
            Event::Reassociate { cv } => {
                if self.cvs[cv].outage.is_some() {
                    self.reassociate(sim, cv, None)?;
                }
            }
            Event::ReplyTimer { cv, responder, rep } => self.on_reply_timer(sim, cv, responder, rep)?,
            Event::ReplyArrive { cv, rep } => {
                let c = &mut self.cvs[cv];
                if c.outage.is_some() {
                    self.stats.stale += 1;
                    return Ok(());
                }
                match process_reply(&mut c.state, &rep)? {
                    ReplyOutcome::Accepted => self.stats.accepted += 1,
                    ReplyOutcome::Duplicate => self.stats.duplicates += 1,
                    ReplyOutcome::Stale => self.stats.stale += 1,
                }
            }
            Event::HandoffDone { cv, ap } => {
                self.flush_packets(cv, now);
                let outage = self.cvs[cv].outage.take().expect("handoff completes an outage");
                self.results.push(HandoffResult {
                    cv_id: self.cvs[cv].state.vehicle_id.clone(),
                    scheme: self.scheme,
                    trigger_time: outage.start,
                    completion_time: now,
                    success: outage.success,
                    packets_exchanged: outage.packets,
                    latency: outage.latency,
                });
                self.associate(sim, cv, ap)?;
            }
        }
        Ok(())
    }
}

/// One highway run under `scheme`. Runs with the same seed share background
/// traffic and the random draws of every vehicle, so the two schemes can be
/// compared pairwise.
pub fn run_highway(config: &CvfhConfig, scheme: Scheme, seed: u64) -> Result<HighwayOutcome, CvfhError> {
    config.validate()?;
    let root = RngStream::new(seed, "cvfh");
    let aps = config.access_points()?;
    let background = sample_highway(&config.flow(), &mut root.substream("traffic"))?
        .into_iter()
        .map(|v| Background {
            x0: v.position_m - BACKGROUND_MARGIN_M,
            sign: v.direction.sign(),
            speed: v.speed_mps,
            replies_seen: BTreeSet::new(),
        })
        .collect();
    let cvs = (0..config.cv_count)
        .map(|i| {
            let x0 = i as f64 * config.cv_spacing_m;
            let id = format!("cv-{i:03}");
            Cv {
                state: VehicleState::new(&id, Point::new(x0, 0.0), config.cv_speed_mps, Point::new(1.0, 0.0)),
                x0,
                assoc: Vec::new(),
                plr: PlrEstimator::new(config.plr_ewma_weight),
                outage: None,
                link_lost: None,
                request_sent_at: f64::NEG_INFINITY,
                next_packet: 0,
                bits: 0,
                data_rng: root.substream(format!("{id}/data")),
                ctl_rng: root.substream(format!("{id}/control")),
            }
        })
        .collect();
    let mut hw = Highway {
        config,
        scheme,
        aps,
        cvs,
        background,
        pending_replies: BTreeMap::new(),
        next_request: 0,
        results: Vec::new(),
        stats: NeighborStats::default(),
        packets_sent: 0,
        packets_delivered: 0,
    };
    let mut sim = Simulation::new();
    for cv in 0..hw.cvs.len() {
        let pos = hw.cv_position(cv, 0.0);
        match hw.nearest_covering(pos, None) {
            Some(ap) => hw.associate(&mut sim, cv, ap)?,
            None => hw.cvs[cv].assoc.push((0.0, None)),
        }
    }
    sim.schedule(SimTime::ZERO, Event::Tick)?;
    let end = SimTime::from_secs(config.duration_s);
    while let Some(ev) = sim.pop_until(end) {
        hw.handle(&mut sim, ev.payload)?;
    }
    for cv in 0..hw.cvs.len() {
        hw.flush_packets(cv, end);
    }
    let throughput = hw
        .cvs
        .iter()
        .map(|c| ThroughputRecord {
            vehicle_id: c.state.vehicle_id.clone(),
            bits_delivered: c.bits,
            window_start: SimTime::ZERO,
            window_end: end,
        })
        .collect();
    Ok(HighwayOutcome {
        scheme,
        handoffs: hw.results,
        throughput,
        packets_sent: hw.packets_sent,
        packets_delivered: hw.packets_delivered,
        neighbor: hw.stats,
        events_processed: sim.events_processed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CvfhConfig {
        CvfhConfig {
            road_length_m: 1500.0,
            cv_count: 3,
            duration_s: 80.0,
            ..CvfhConfig::default()
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let a = run_highway(&small(), Scheme::Cvfh, 11).unwrap();
        let b = run_highway(&small(), Scheme::Cvfh, 11).unwrap();
        assert_eq!(a, b);
        assert!(!a.handoffs.is_empty());
    }

    #[test]
    fn latency_parts_add_up() {
        for scheme in [Scheme::Cvfh, Scheme::Ieee80211] {
            let o = run_highway(&small(), scheme, 5).unwrap();
            for h in &o.handoffs {
                assert!(h.completion_time >= h.trigger_time);
                assert!((h.latency.total() - h.delay_s()).abs() < 1e-6, "{h:?}");
                match scheme {
                    Scheme::Cvfh => assert_eq!(h.latency.auth_s + h.latency.assoc_s, 0.0),
                    Scheme::Ieee80211 => assert!(h.latency.auth_s > 0.0 && h.latency.assoc_s > 0.0),
                }
            }
        }
    }

    #[test]
    fn neighbor_assisted_handoffs_happen() {
        let o = run_highway(&small(), Scheme::Cvfh, 3).unwrap();
        assert!(o.neighbor.requests > 0);
        assert!(o.neighbor.accepted <= o.neighbor.requests);
        assert!(o.handoffs.iter().any(|h| h.success));
    }

    #[test]
    fn bad_config_rejected() {
        let c = CvfhConfig {
            cv_speed_mps: 0.0,
            ..CvfhConfig::default()
        };
        assert!(run_highway(&c, Scheme::Cvfh, 1).is_err());
    }
}
