use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    Action, CloudNode, CloudPolicy, CloudTables, Content, Envelope, FogNode, FogRouteError, GlobalContentEntry,
    MessageCounters, NodeId,
};
use crate::metrics::{ConvergenceRecord, DeliveryRecord};
use crate::mobility::{
    generate_fog_grid, generate_synthetic_trace, ContactIndex, Station, SyntheticTraceParams, TraceSet,
};
use crate::sim::{EventHandle, RngStream, SimTime, Simulation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FogRouteConfig {
    /// Fog servers to generate when no station file is given.
    pub fog_servers: usize,
    pub fog_range_m: f64,
    /// Generator settings when no trace file is given.
    pub trace: SyntheticTraceParams,
    pub contents: usize,
    /// Contents each server holds in an outdated version.
    pub stale_per_server: usize,
    pub content_size_bytes: u64,
    pub affordable_delay_s: f64,
    /// Hellos build up movement patterns before any copy goes stale.
    pub warmup_s: f64,
    /// Length of the dissemination phase after warmup.
    pub horizon_s: f64,
    /// Outdated copies lapse uniformly within this window after warmup.
    pub lapse_window_s: f64,
    pub hello_interval_s: f64,
    pub backhaul_latency_s: f64,
    pub visit_history_k: usize,
    pub policy: CloudPolicy,
}

impl Default for FogRouteConfig {
    fn default() -> Self {
        FogRouteConfig {
            fog_servers: 50,
            fog_range_m: 300.0,
            trace: SyntheticTraceParams {
                width_m: 30_000.0,
                height_m: 30_000.0,
                taxi_speed_max_mps: 5.0,
                ..SyntheticTraceParams::default()
            },
            contents: 40,
            stale_per_server: 20,
            content_size_bytes: 20_000_000,
            affordable_delay_s: 6.0 * 3600.0,
            warmup_s: 12.0 * 3600.0,
            horizon_s: 12.0 * 3600.0,
            lapse_window_s: 600.0,
            hello_interval_s: 60.0,
            backhaul_latency_s: 0.05,
            visit_history_k: 3,
            policy: CloudPolicy::default(),
        }
    }
}

impl FogRouteConfig {
    pub fn validate(&self) -> Result<(), FogRouteError> {
        let bad = |m: &str| Err(FogRouteError::InvalidConfig(m.to_string()));
        if self.stale_per_server > self.contents {
            return bad("stale_per_server exceeds contents");
        }
        if self.content_size_bytes == 0 {
            return bad("content_size_bytes must be > 0");
        }
        for (name, v) in [
            ("affordable_delay_s", self.affordable_delay_s),
            ("horizon_s", self.horizon_s),
            ("hello_interval_s", self.hello_interval_s),
            ("uplink_bytes_per_s", self.policy.selection.uplink_bytes_per_s),
            ("replan_interval_s", self.policy.replan_interval_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FogRouteError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("warmup_s", self.warmup_s),
            ("lapse_window_s", self.lapse_window_s),
            ("backhaul_latency_s", self.backhaul_latency_s),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(FogRouteError::InvalidConfig(format!("{name} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Stations, device traces and their precomputed contacts.
#[derive(Debug, Clone)]
pub struct FogRouteScenario {
    pub stations: Vec<Station>,
    pub traces: TraceSet,
    pub contacts: ContactIndex,
}

impl FogRouteScenario {
    pub fn new(stations: Vec<Station>, traces: TraceSet) -> Self {
        let contacts = ContactIndex::build(&traces, &stations);
        FogRouteScenario {
            stations,
            traces,
            contacts,
        }
    }

    /// Jittered grid of fog servers plus the synthetic bus/taxi trace.
    pub fn synthetic(config: &FogRouteConfig, seed: u64) -> Result<Self, FogRouteError> {
        let root = RngStream::new(seed, "fogroute");
        let stations = generate_fog_grid(
            config.fog_servers,
            config.trace.width_m,
            config.trace.height_m,
            config.fog_range_m,
            &mut root.substream("stations"),
        );
        let traces = generate_synthetic_trace(&config.trace, &stations, &mut root.substream("trace"))?;
        Ok(Self::new(stations, traces))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FogRouteOutcome {
    pub deliveries: Vec<DeliveryRecord>,
    pub convergence: Vec<ConvergenceRecord>,
    pub counters: MessageCounters,
    /// Carrier hand-overs at a target that produced an Ack.
    pub carrier_deliveries: u64,
    pub events_processed: u64,
    pub dissemination_start: SimTime,
    pub end: SimTime,
}

#[derive(Debug, Clone)]
enum Event {
    Attach {
        device: usize,
        station: usize,
        until: f64,
    },
    Detach {
        device: usize,
        station: usize,
    },
    HelloTick,
    CloudTick,
    Deliver(Envelope),
    CarrierArrive {
        station: usize,
        content_id: String,
        date: SimTime,
    },
    Deadline {
        target: String,
        content_id: String,
    },
    PushArrive {
        station: usize,
        content_id: String,
        date: SimTime,
    },
}

struct World<'a> {
    config: &'a FogRouteConfig,
    scenario: &'a FogRouteScenario,
    station_index: BTreeMap<String, usize>,
    fogs: Vec<FogNode>,
    cloud: CloudNode,
    deadlines: BTreeMap<(String, String), EventHandle>,
    order_rng: RngStream,
    carrier_deliveries: u64,
    end: SimTime,
}

impl World<'_> {
    fn position(&self, device: usize, t: SimTime) -> crate::mobility::Point {
        let track = &self.scenario.traces.tracks()[device];
        let clamped = t.secs().clamp(track.start(), track.end());
        track.position_at(clamped).expect("clamped time lies in the track span")
    }

    fn schedule_msg(&self, sim: &mut Simulation<Event>, env: Envelope) -> Result<(), FogRouteError> {
        let at = (env.sent_at + self.config.backhaul_latency_s).max(sim.now());
        sim.schedule(at, Event::Deliver(env))?;
        Ok(())
    }

    fn apply(&mut self, sim: &mut Simulation<Event>, actions: Vec<Action>) -> Result<(), FogRouteError> {
        for action in actions {
            match action {
                Action::Send(env) => self.schedule_msg(sim, env)?,
                Action::LoadCarrier {
                    device_id,
                    content_id,
                    date_of_update,
                    target_fog_id,
                    ready_at,
                } => {
                    self.cloud.counters.carrier_loads += 1;
                    let device = self
                        .scenario
                        .traces
                        .position_of(&device_id)
                        .ok_or_else(|| FogRouteError::InvalidConfig(format!("unknown device {device_id}")))?;
                    let station = self.station_index[&target_fog_id];
                    let upload =
                        self.config.content_size_bytes as f64 / self.config.policy.selection.uplink_bytes_per_s;
                    let spans = self.scenario.contacts.between(device, station);
                    let first = spans.partition_point(|s| s.end <= ready_at.secs());
                    let arrival = spans[first..].iter().find_map(|s| {
                        let begin = s.start.max(ready_at.secs());
                        super::carrier_transport(
                            self.config.content_size_bytes,
                            self.config.policy.selection.uplink_bytes_per_s,
                            s.end - begin,
                        )
                        .then_some(begin + upload)
                    });
                    if let Some(t) = arrival.filter(|t| *t <= self.end.secs()) {
                        sim.schedule(
                            SimTime::from_secs(t),
                            Event::CarrierArrive {
                                station,
                                content_id,
                                date: date_of_update,
                            },
                        )?;
                    }
                }
                Action::DirectPush {
                    target_fog_id,
                    content_id,
                } => {
                    let date = self.cloud.tables.catalog[&content_id].date_of_update;
                    let station = self.station_index[&target_fog_id];
                    sim.schedule_in(
                        self.config.backhaul_latency_s,
                        Event::PushArrive {
                            station,
                            content_id,
                            date,
                        },
                    )?;
                }
                Action::ArmDeadline {
                    target_fog_id,
                    content_id,
                    at,
                } => {
                    let h = sim.schedule(
                        at,
                        Event::Deadline {
                            target: target_fog_id.clone(),
                            content_id: content_id.clone(),
                        },
                    )?;
                    self.deadlines.insert((target_fog_id, content_id), h);
                }
                Action::Resolved {
                    target_fog_id,
                    content_id,
                } => {
                    if let Some(h) = self.deadlines.remove(&(target_fog_id, content_id)) {
                        sim.cancel(h);
                    }
                }
            }
        }
        Ok(())
    }

    fn handle(&mut self, sim: &mut Simulation<Event>, event: Event, draining: bool) -> Result<(), FogRouteError> {
        let now = sim.now();
        let interval = self.config.hello_interval_s;
        match event {
            Event::Deliver(env) => {
                let actions = match &env.receiver {
                    NodeId::Cloud => self.cloud.handle_message(&env, now)?,
                    NodeId::Fog(id) => {
                        let i = *self
                            .station_index
                            .get(id)
                            .ok_or_else(|| FogRouteError::UnknownFogServer(id.clone()))?;
                        self.fogs[i].handle_message(
                            &env,
                            now,
                            &self.cloud.tables.catalog,
                            self.config.policy.selection.uplink_bytes_per_s,
                        )?
                    }
                };
                self.apply(sim, actions)?;
            }
            _ if draining => {}
            Event::Attach { device, station, until } => {
                let id = self.scenario.traces.tracks()[device].device_id.clone();
                let pos = self.position(device, now);
                self.fogs[station].attach(&id, now, SimTime::from_secs(until), pos);
            }
            Event::Detach { device, station } => {
                let id = self.scenario.traces.tracks()[device].device_id.as_str();
                self.fogs[station].detach(id, now);
            }
            Event::HelloTick => {
                for i in 0..self.fogs.len() {
                    let scenario = self.scenario;
                    let env = self.fogs[i].hello(now, |d| {
                        let idx = scenario
                            .traces
                            .position_of(d)
                            .expect("attached devices come from the trace");
                        let track = &scenario.traces.tracks()[idx];
                        track
                            .position_at(now.secs().clamp(track.start(), track.end()))
                            .expect("clamped")
                    });
                    self.schedule_msg(sim, env)?;
                }
                if now + interval <= self.end {
                    sim.schedule_in(interval, Event::HelloTick)?;
                }
            }
            Event::CloudTick => {
                let actions = self.cloud.tick(now, &mut self.order_rng)?;
                self.apply(sim, actions)?;
                if now + interval <= self.end {
                    sim.schedule_in(interval, Event::CloudTick)?;
                }
            }
            Event::CarrierArrive {
                station,
                content_id,
                date,
            } => {
                if let Some(ack) = self.fogs[station].receive_carried(&content_id, date, now) {
                    self.carrier_deliveries += 1;
                    self.schedule_msg(sim, ack)?;
                }
            }
            Event::Deadline { target, content_id } => {
                self.deadlines.remove(&(target.clone(), content_id.clone()));
                let actions = self.cloud.deadline(&target, &content_id, now)?;
                self.apply(sim, actions)?;
            }
            Event::PushArrive {
                station,
                content_id,
                date,
            } => {
                if self.fogs[station].version(&content_id).is_none_or(|d| d < date) {
                    self.fogs[station].store(&content_id, date);
                }
            }
        }
        Ok(())
    }
}

/// Runs warmup plus one dissemination phase over `scenario`.
///
/// Every server starts with all contents; `stale_per_server` of them, picked
/// at random, are an outdated version whose validation lapses shortly after
/// warmup. After the horizon only in-flight messages are delivered, so every
/// Request sent gets its reply counted.
pub fn run_fogroute(
    config: &FogRouteConfig,
    scenario: &FogRouteScenario,
    seed: u64,
) -> Result<FogRouteOutcome, FogRouteError> {
    config.validate()?;
    if scenario.stations.is_empty() {
        return Err(FogRouteError::InvalidConfig("no fog servers".into()));
    }
    let root = RngStream::new(seed, "fogroute");
    let mut catalog_rng = root.substream("catalog");
    let start = SimTime::from_secs(config.warmup_s);
    let end = start + config.horizon_s;
    let current = SimTime::from_secs(1.0);

    let contents: Vec<Content> = (0..config.contents)
        .map(|i| Content {
            content_id: format!("c-{i:03}"),
            size_bytes: config.content_size_bytes,
            affordable_delay_s: config.affordable_delay_s,
            date_of_update: current,
            validation_time_s: f64::MAX / 4.0,
        })
        .collect();

    let mut tables = CloudTables::new(config.visit_history_k);
    for c in &contents {
        tables.publish(c.clone());
    }
    let mut fogs = Vec::with_capacity(scenario.stations.len());
    let mut station_index = BTreeMap::new();
    let mut required: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, st) in scenario.stations.iter().enumerate() {
        station_index.insert(st.station_id.clone(), i);
        tables.add_fog_server(&st.station_id, st.position);
        let mut fog = FogNode::new(&st.station_id, st.position);
        let outdated: Vec<&Content> = contents
            .choose_multiple(&mut catalog_rng, config.stale_per_server)
            .collect();
        for c in &contents {
            let stale = outdated.iter().any(|o| o.content_id == c.content_id);
            let (date, validation) = if stale {
                let lapse = config.warmup_s + catalog_rng.random_range(0.0..=config.lapse_window_s);
                (SimTime::ZERO, lapse)
            } else {
                (current, c.validation_time_s)
            };
            fog.store(&c.content_id, date);
            tables.upsert_gc(GlobalContentEntry {
                fog_server_id: st.station_id.clone(),
                content_id: c.content_id.clone(),
                date_of_update: date,
                validation_time_s: validation,
            })?;
        }
        let mut req: Vec<String> = outdated.iter().map(|c| c.content_id.clone()).collect();
        req.sort();
        required.insert(st.station_id.clone(), req);
        fogs.push(fog);
    }
    for track in scenario.traces.tracks() {
        tables.device_kinds.insert(track.device_id.clone(), track.kind.clone());
    }

    let mut sim: Simulation<Event> = Simulation::new();
    for (device, station, span) in scenario.contacts.all() {
        if span.start > end.secs() {
            continue;
        }
        sim.schedule(
            SimTime::from_secs(span.start),
            Event::Attach {
                device,
                station,
                until: span.end,
            },
        )?;
        sim.schedule(SimTime::from_secs(span.end), Event::Detach { device, station })?;
    }
    sim.schedule(SimTime::from_secs(config.hello_interval_s), Event::HelloTick)?;
    sim.schedule(SimTime::from_secs(config.hello_interval_s * 1.5), Event::CloudTick)?;

    let mut world = World {
        config,
        scenario,
        station_index,
        fogs,
        cloud: CloudNode::new(tables, config.policy),
        deadlines: BTreeMap::new(),
        order_rng: root.substream("order"),
        carrier_deliveries: 0,
        end,
    };

    while let Some(ev) = sim.pop_until(end) {
        world.handle(&mut sim, ev.payload, false)?;
    }
    while let Some(ev) = sim.pop_until(SimTime::from_secs(f64::MAX)) {
        world.handle(&mut sim, ev.payload, true)?;
    }

    let deliveries = world.cloud.delivery_records();
    let mut delivered: BTreeMap<(&str, &str), SimTime> = BTreeMap::new();
    for d in &deliveries {
        if let Some(at) = d.delivered_at.filter(|at| *at <= end) {
            delivered.insert((d.target_fog_id.as_str(), d.content_id.as_str()), at);
        }
    }
    let convergence = required
        .iter()
        .map(|(server, req)| {
            let times: Vec<SimTime> = req
                .iter()
                .filter_map(|c| delivered.get(&(server.as_str(), c.as_str())).copied())
                .collect();
            let converged_at =
                (times.len() == req.len()).then(|| times.iter().copied().max().unwrap_or(start).max(start));
            ConvergenceRecord {
                fog_server_id: server.clone(),
                contents_required: req.len(),
                contents_received: times.len(),
                since: start,
                converged_at,
            }
        })
        .collect();

    Ok(FogRouteOutcome {
        deliveries,
        convergence,
        counters: world.cloud.counters,
        carrier_deliveries: world.carrier_deliveries,
        events_processed: sim.events_processed(),
        dissemination_start: start,
        end,
    })
}
