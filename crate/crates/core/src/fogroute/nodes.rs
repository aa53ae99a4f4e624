use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    detect_stale, plan_dissemination, AttachedDevice, CloudTables, ContactReport, Content, DeclineReason,
    DissemMessage, Envelope, FogRouteError, NodeId, Plan, PushReason, SelectionPolicy,
};
use crate::metrics::{Channel, DeliveryRecord};
use crate::mobility::Point;
use crate::sim::SimTime;

/// Side effect requested by a node; the simulation carries it out.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Put the envelope on the backhaul at its `sent_at`.
    Send(Envelope),
    /// A holder finished uploading `content_id` to `device_id` at `ready_at`.
    LoadCarrier {
        device_id: String,
        content_id: String,
        date_of_update: SimTime,
        target_fog_id: String,
        ready_at: SimTime,
    },
    /// The cloud sends the content to the target itself.
    DirectPush { target_fog_id: String, content_id: String },
    /// Start the fallback timer for a newly detected pair.
    ArmDeadline {
        target_fog_id: String,
        content_id: String,
        at: SimTime,
    },
    /// The pair needs no further work; its deadline timer can go.
    Resolved { target_fog_id: String, content_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Attachment {
    since: SimTime,
    /// When the radio contact ends. Known to the link layer, not the cloud.
    until: SimTime,
    position: Point,
}

/// Data plane of one fog server.
#[derive(Debug, Clone)]
pub struct FogNode {
    pub id: String,
    pub position: Point,
    contents: BTreeMap<String, SimTime>,
    attached: BTreeMap<String, Attachment>,
    reports: Vec<ContactReport>,
}

impl FogNode {
    pub fn new(id: impl Into<String>, position: Point) -> Self {
        FogNode {
            id: id.into(),
            position,
            contents: BTreeMap::new(),
            attached: BTreeMap::new(),
            reports: Vec::new(),
        }
    }

    fn node_id(&self) -> NodeId {
        NodeId::Fog(self.id.clone())
    }

    pub fn store(&mut self, content_id: &str, date: SimTime) {
        self.contents.insert(content_id.to_string(), date);
    }

    pub fn version(&self, content_id: &str) -> Option<SimTime> {
        self.contents.get(content_id).copied()
    }

    pub fn attach(&mut self, device_id: &str, since: SimTime, until: SimTime, position: Point) {
        self.attached
            .insert(device_id.to_string(), Attachment { since, until, position });
    }

    pub fn detach(&mut self, device_id: &str, now: SimTime) {
        if let Some(a) = self.attached.remove(device_id) {
            self.reports.push(ContactReport {
                device_id: device_id.to_string(),
                start: a.since,
                end: now,
                position: a.position,
            });
        }
    }

    pub fn is_attached(&self, device_id: &str) -> bool {
        self.attached.contains_key(device_id)
    }

    /// Status report for the cloud; drains the finished-contact log.
    pub fn hello(&mut self, now: SimTime, mut position_of: impl FnMut(&str) -> Point) -> Envelope {
        let attached = self
            .attached
            .keys()
            .map(|d| AttachedDevice {
                device_id: d.clone(),
                position: position_of(d),
            })
            .collect();
        Envelope {
            sender: self.node_id(),
            receiver: NodeId::Cloud,
            sent_at: now,
            message: DissemMessage::Hello {
                content_ids: self.contents.keys().cloned().collect(),
                attached,
                contacts: std::mem::take(&mut self.reports),
            },
        }
    }

    /// Handles a Request: uploads to every named carrier that stays attached
    /// long enough, then answers Accept (at least one loaded) or Decline.
    pub fn handle_message(
        &mut self,
        env: &Envelope,
        now: SimTime,
        catalog: &BTreeMap<String, Content>,
        uplink_bytes_per_s: f64,
    ) -> Result<Vec<Action>, FogRouteError> {
        if env.receiver != self.node_id() {
            return Err(FogRouteError::Misaddressed {
                node: self.id.clone(),
                receiver: env.receiver.to_string(),
            });
        }
        let DissemMessage::DataDissemRequest {
            content_id,
            target_fog_id,
            carriers,
        } = &env.message
        else {
            return Err(FogRouteError::WrongRole {
                node: self.id.clone(),
                message: env.message.kind(),
            });
        };
        let content = catalog
            .get(content_id)
            .ok_or_else(|| FogRouteError::UnknownContent(content_id.clone()))?;
        let upload = content.upload_time(uplink_bytes_per_s);
        let held = self.version(content_id);

        let mut actions = Vec::new();
        let mut loaded = Vec::new();
        let mut any_attached = false;
        if let Some(date) = held.filter(|d| *d >= content.date_of_update) {
            for device_id in carriers {
                let Some(a) = self.attached.get(device_id) else {
                    continue;
                };
                any_attached = true;
                if super::carrier_transport(content.size_bytes, uplink_bytes_per_s, a.until - now) {
                    loaded.push(device_id.clone());
                    actions.push(Action::LoadCarrier {
                        device_id: device_id.clone(),
                        content_id: content_id.clone(),
                        date_of_update: date,
                        target_fog_id: target_fog_id.clone(),
                        ready_at: now + upload,
                    });
                }
            }
        }
        let (message, sent_at) = if !loaded.is_empty() {
            (
                DissemMessage::DataDissemAccept {
                    content_id: content_id.clone(),
                    target_fog_id: target_fog_id.clone(),
                    carriers: loaded,
                },
                now + upload,
            )
        } else {
            let reason = if held.is_none_or(|d| d < content.date_of_update) {
                DeclineReason::NotHeld
            } else if any_attached {
                DeclineReason::ContactTooShort
            } else {
                DeclineReason::NoCarrierAttached
            };
            (
                DissemMessage::DataDissemDecline {
                    content_id: content_id.clone(),
                    target_fog_id: target_fog_id.clone(),
                    reason,
                },
                now,
            )
        };
        actions.push(Action::Send(Envelope {
            sender: self.node_id(),
            receiver: NodeId::Cloud,
            sent_at,
            message,
        }));
        Ok(actions)
    }

    /// A carrier hands over `content_id`. Returns the Ack when it is news here.
    pub fn receive_carried(&mut self, content_id: &str, date: SimTime, now: SimTime) -> Option<Envelope> {
        if self.version(content_id).is_some_and(|d| d >= date) {
            return None;
        }
        self.store(content_id, date);
        Some(Envelope {
            sender: self.node_id(),
            receiver: NodeId::Cloud,
            sent_at: now,
            message: DissemMessage::DataDissemAck {
                content_id: content_id.to_string(),
                date_of_update: date,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    /// Stale pairs of a tick are processed in a seeded random order.
    #[default]
    Random,
    /// Oldest detection first, ties by target then content.
    Fifo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloudPolicy {
    pub selection: SelectionPolicy,
    /// Push directly when DTN fails or the affordable delay lapses.
    pub fallback_enabled: bool,
    /// A pair whose carriers have not delivered is re-planned after this long.
    pub replan_interval_s: f64,
    pub ordering: Ordering,
}

impl Default for CloudPolicy {
    fn default() -> Self {
        CloudPolicy {
            selection: SelectionPolicy::default(),
            fallback_enabled: true,
            replan_interval_s: 1800.0,
            ordering: Ordering::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MessageCounters {
    pub hellos: u64,
    pub requests: u64,
    pub accepts: u64,
    pub declines: u64,
    pub acks: u64,
    pub carrier_loads: u64,
    pub direct_pushes: u64,
}

#[derive(Debug, Clone, PartialEq)]
enum Status {
    /// Waiting for carriers to become available.
    Unplanned,
    /// Requests out; counts replies still due and carriers loaded so far.
    Requested {
        outstanding: usize,
        loaded: usize,
        planned_at: SimTime,
    },
    /// At least one carrier is on its way.
    Carrying {
        planned_at: SimTime,
    },
    Delivered {
        at: SimTime,
        channel: Channel,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct PairState {
    requested_at: SimTime,
    status: Status,
}

/// Control plane: tables plus per-pair dissemination state.
#[derive(Debug, Clone)]
pub struct CloudNode {
    pub tables: CloudTables,
    pub policy: CloudPolicy,
    pub counters: MessageCounters,
    pairs: BTreeMap<(String, String), PairState>,
}

impl CloudNode {
    pub fn new(tables: CloudTables, policy: CloudPolicy) -> Self {
        CloudNode {
            tables,
            policy,
            counters: MessageCounters::default(),
            pairs: BTreeMap::new(),
        }
    }

    pub fn handle_message(&mut self, env: &Envelope, now: SimTime) -> Result<Vec<Action>, FogRouteError> {
        if env.receiver != NodeId::Cloud {
            return Err(FogRouteError::Misaddressed {
                node: "cloud".into(),
                receiver: env.receiver.to_string(),
            });
        }
        let NodeId::Fog(sender) = &env.sender else {
            return Err(FogRouteError::WrongRole {
                node: "cloud".into(),
                message: env.message.kind(),
            });
        };
        match &env.message {
            DissemMessage::Hello { attached, contacts, .. } => {
                self.counters.hellos += 1;
                let fs = self
                    .tables
                    .fs
                    .get_mut(sender)
                    .ok_or_else(|| FogRouteError::UnknownFogServer(sender.clone()))?;
                fs.mobile_device_ids = attached.iter().map(|a| a.device_id.clone()).collect();
                for a in attached {
                    self.tables
                        .device_positions
                        .insert(a.device_id.clone(), (env.sent_at, a.position));
                }
                for c in contacts {
                    self.tables
                        .record_contact(&c.device_id, sender, c.start, c.end, c.position);
                }
                Ok(Vec::new())
            }
            DissemMessage::DataDissemAccept {
                content_id,
                target_fog_id,
                carriers,
            } => {
                self.counters.accepts += 1;
                if let Some(p) = self.pairs.get_mut(&(target_fog_id.clone(), content_id.clone())) {
                    if let Status::Requested {
                        outstanding, loaded, ..
                    } = &mut p.status
                    {
                        *outstanding = outstanding.saturating_sub(1);
                        *loaded += carriers.len();
                    }
                    Self::settle_replies(p);
                }
                Ok(Vec::new())
            }
            DissemMessage::DataDissemDecline {
                content_id,
                target_fog_id,
                ..
            } => {
                self.counters.declines += 1;
                let key = (target_fog_id.clone(), content_id.clone());
                let Some(p) = self.pairs.get_mut(&key) else {
                    return Ok(Vec::new());
                };
                if let Status::Requested { outstanding, .. } = &mut p.status {
                    *outstanding = outstanding.saturating_sub(1);
                }
                Self::settle_replies(p);
                if p.status == Status::Unplanned && self.policy.fallback_enabled {
                    return self.push(target_fog_id, content_id, now);
                }
                Ok(Vec::new())
            }
            DissemMessage::DataDissemAck {
                content_id,
                date_of_update,
            } => {
                self.counters.acks += 1;
                self.tables.apply_update(sender, content_id, *date_of_update)?;
                let key = (sender.clone(), content_id.clone());
                match self.pairs.get_mut(&key) {
                    Some(p) if !matches!(p.status, Status::Delivered { .. }) => {
                        p.status = Status::Delivered {
                            at: env.sent_at,
                            channel: Channel::Dtn,
                        };
                        Ok(vec![Action::Resolved {
                            target_fog_id: sender.clone(),
                            content_id: content_id.clone(),
                        }])
                    }
                    _ => Ok(Vec::new()),
                }
            }
            DissemMessage::DataDissemRequest { .. } => Err(FogRouteError::WrongRole {
                node: "cloud".into(),
                message: env.message.kind(),
            }),
        }
    }

    /// Moves a pair out of `Requested` once every reply is in.
    fn settle_replies(p: &mut PairState) {
        if let Status::Requested {
            outstanding: 0,
            loaded,
            planned_at,
        } = p.status
        {
            p.status = if loaded > 0 {
                Status::Carrying { planned_at }
            } else {
                Status::Unplanned
            };
        }
    }

    fn push(&mut self, target_fog_id: &str, content_id: &str, now: SimTime) -> Result<Vec<Action>, FogRouteError> {
        let date = self
            .tables
            .catalog
            .get(content_id)
            .map(|c| c.date_of_update)
            .ok_or_else(|| FogRouteError::UnknownContent(content_id.to_string()))?;
        self.tables.apply_update(target_fog_id, content_id, date)?;
        self.counters.direct_pushes += 1;
        let key = (target_fog_id.to_string(), content_id.to_string());
        let requested_at = self.pairs.get(&key).map_or(now, |p| p.requested_at);
        self.pairs.insert(
            key,
            PairState {
                requested_at,
                status: Status::Delivered {
                    at: now,
                    channel: Channel::CloudDirect,
                },
            },
        );
        Ok(vec![
            Action::DirectPush {
                target_fog_id: target_fog_id.to_string(),
                content_id: content_id.to_string(),
            },
            Action::Resolved {
                target_fog_id: target_fog_id.to_string(),
                content_id: content_id.to_string(),
            },
        ])
    }

    /// Fallback timer for a pair fired.
    pub fn deadline(
        &mut self,
        target_fog_id: &str,
        content_id: &str,
        now: SimTime,
    ) -> Result<Vec<Action>, FogRouteError> {
        let key = (target_fog_id.to_string(), content_id.to_string());
        match self.pairs.get(&key) {
            Some(p) if !matches!(p.status, Status::Delivered { .. }) && self.policy.fallback_enabled => {
                self.push(target_fog_id, content_id, now)
            }
            _ => Ok(Vec::new()),
        }
    }

    /// One control round: detect stale pairs and (re)plan those that need it.
    pub fn tick<R: Rng>(&mut self, now: SimTime, rng: &mut R) -> Result<Vec<Action>, FogRouteError> {
        let mut stale = detect_stale(&self.tables, now);
        let mut actions = Vec::new();
        for (target, content) in &stale {
            let key = (target.clone(), content.clone());
            if self.pairs.contains_key(&key) {
                continue;
            }
            self.pairs.insert(
                key,
                PairState {
                    requested_at: now,
                    status: Status::Unplanned,
                },
            );
            if self.policy.fallback_enabled {
                let t_d = self
                    .tables
                    .catalog
                    .get(content)
                    .map(|c| c.affordable_delay_s)
                    .ok_or_else(|| FogRouteError::UnknownContent(content.clone()))?;
                actions.push(Action::ArmDeadline {
                    target_fog_id: target.clone(),
                    content_id: content.clone(),
                    at: now + t_d,
                });
            }
        }
        match self.policy.ordering {
            Ordering::Random => stale.shuffle(rng),
            Ordering::Fifo => stale.sort_by(|a, b| {
                let ta = self.pairs[a].requested_at;
                let tb = self.pairs[b].requested_at;
                ta.cmp(&tb).then_with(|| a.cmp(b))
            }),
        }
        for (target, content) in stale {
            let key = (target.clone(), content.clone());
            let due = match self.pairs[&key].status {
                Status::Unplanned => true,
                Status::Carrying { planned_at } => now - planned_at >= self.policy.replan_interval_s,
                Status::Requested { .. } | Status::Delivered { .. } => false,
            };
            if !due {
                continue;
            }
            match plan_dissemination(&self.tables, &target, &content, now, &self.policy.selection)? {
                Plan::DirectCloudPush(PushReason::NoHolder) => actions.extend(self.push(&target, &content, now)?),
                Plan::DirectCloudPush(PushReason::NoCarrier) => {
                    if self.policy.fallback_enabled {
                        actions.extend(self.push(&target, &content, now)?);
                    }
                }
                Plan::DtnViaCarriers(assignment) => {
                    let requests = self.requests_for(&assignment, now);
                    if requests.is_empty() {
                        continue;
                    }
                    self.counters.requests += requests.len() as u64;
                    if let Some(p) = self.pairs.get_mut(&key) {
                        p.status = Status::Requested {
                            outstanding: requests.len(),
                            loaded: 0,
                            planned_at: now,
                        };
                    }
                    actions.extend(requests.into_iter().map(Action::Send));
                }
            }
        }
        Ok(actions)
    }

    /// One Request per holder, naming the assigned carriers last reported there.
    /// A carrier seen at several holders is asked for by the first in id order.
    fn requests_for(&self, a: &super::CarrierAssignment, now: SimTime) -> Vec<Envelope> {
        let mut by_holder: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let holders = self.tables.holders(&a.content_id, &a.target_fog_id);
        for device in a.devices() {
            if let Some(h) = holders
                .iter()
                .find(|h| self.tables.fs[*h].mobile_device_ids.contains(device))
            {
                by_holder.entry(h.clone()).or_default().push(device.clone());
            }
        }
        by_holder
            .into_iter()
            .map(|(holder, carriers)| Envelope {
                sender: NodeId::Cloud,
                receiver: NodeId::Fog(holder),
                sent_at: now,
                message: DissemMessage::DataDissemRequest {
                    content_id: a.content_id.clone(),
                    target_fog_id: a.target_fog_id.clone(),
                    carriers,
                },
            })
            .collect()
    }

    /// Outcome of every pair detected so far, ordered by target then content.
    pub fn delivery_records(&self) -> Vec<DeliveryRecord> {
        self.pairs
            .iter()
            .map(|((target, content), p)| {
                let (delivered_at, channel) = match p.status {
                    Status::Delivered { at, channel } => (Some(at), channel),
                    _ => (None, Channel::Dtn),
                };
                DeliveryRecord {
                    content_id: content.clone(),
                    target_fog_id: target.clone(),
                    requested_at: p.requested_at,
                    delivered_at,
                    channel,
                }
            })
            .collect()
    }

    pub fn pending_pairs(&self) -> usize {
        self.pairs
            .values()
            .filter(|p| !matches!(p.status, Status::Delivered { .. }))
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fogroute::GlobalContentEntry;

    fn catalog() -> BTreeMap<String, Content> {
        let c = Content {
            content_id: "c".into(),
            size_bytes: 10_000_000,
            affordable_delay_s: 3600.0,
            date_of_update: SimTime::from_secs(100.0),
            validation_time_s: 0.0,
        };
        BTreeMap::from([("c".to_string(), c)])
    }

    fn request(to: &str, carriers: &[&str]) -> Envelope {
        Envelope {
            sender: NodeId::Cloud,
            receiver: NodeId::Fog(to.into()),
            sent_at: SimTime::from_secs(10.0),
            message: DissemMessage::DataDissemRequest {
                content_id: "c".into(),
                target_fog_id: "t".into(),
                carriers: carriers.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    fn holder() -> FogNode {
        let mut f = FogNode::new("h", Point::new(0.0, 0.0));
        f.store("c", SimTime::from_secs(100.0));
        f
    }

    #[test]
    fn request_with_attached_carrier_is_accepted() {
        let mut f = holder();
        let now = SimTime::from_secs(10.0);
        f.attach("d", SimTime::ZERO, SimTime::from_secs(40.0), Point::new(0.0, 0.0));
        let actions = f.handle_message(&request("h", &["d"]), now, &catalog(), 1e6).unwrap();
        assert!(matches!(&actions[0], Action::LoadCarrier { device_id, ready_at, .. }
            if device_id == "d" && *ready_at == SimTime::from_secs(20.0)));
        assert!(matches!(&actions[1], Action::Send(e) if e.message.kind() == "accept"));
    }

    #[test]
    fn short_contact_is_declined() {
        let mut f = holder();
        f.attach("d", SimTime::ZERO, SimTime::from_secs(15.0), Point::new(0.0, 0.0));
        let actions = f
            .handle_message(&request("h", &["d"]), SimTime::from_secs(10.0), &catalog(), 1e6)
            .unwrap();
        assert_eq!(actions.len(), 1);
        assert!(matches!(
            &actions[0],
            Action::Send(Envelope {
                message: DissemMessage::DataDissemDecline {
                    reason: DeclineReason::ContactTooShort,
                    ..
                },
                ..
            })
        ));
    }

    #[test]
    fn misrouted_messages_are_errors() {
        let mut f = holder();
        assert!(f
            .handle_message(&request("other", &["d"]), SimTime::ZERO, &catalog(), 1e6)
            .is_err());
        let mut cloud = CloudNode::new(CloudTables::new(3), CloudPolicy::default());
        let mut env = request("h", &[]);
        env.receiver = NodeId::Cloud;
        env.sender = NodeId::Fog("h".into());
        assert!(matches!(
            cloud.handle_message(&env, SimTime::ZERO),
            Err(FogRouteError::WrongRole { .. })
        ));
        let mut bad = request("h", &["d"]);
        if let DissemMessage::DataDissemRequest { content_id, .. } = &mut bad.message {
            *content_id = "zz".into();
        }
        assert!(matches!(
            f.handle_message(&bad, SimTime::ZERO, &catalog(), 1e6),
            Err(FogRouteError::UnknownContent(_))
        ));
    }

    #[test]
    fn carried_content_is_acked_once() {
        let mut t = FogNode::new("t", Point::new(0.0, 0.0));
        t.store("c", SimTime::ZERO);
        let date = SimTime::from_secs(100.0);
        assert!(t.receive_carried("c", date, SimTime::from_secs(5.0)).is_some());
        assert!(t.receive_carried("c", date, SimTime::from_secs(6.0)).is_none());
    }

    #[test]
    fn ack_updates_tables_and_resolves() {
        let mut tables = CloudTables::new(3);
        tables.add_fog_server("h", Point::new(0.0, 0.0));
        tables.add_fog_server("t", Point::new(500.0, 0.0));
        for (f, d) in [("h", 100.0), ("t", 0.0)] {
            tables
                .upsert_gc(GlobalContentEntry {
                    fog_server_id: f.into(),
                    content_id: "c".into(),
                    date_of_update: SimTime::from_secs(d),
                    validation_time_s: 0.0,
                })
                .unwrap();
        }
        for (_, c) in catalog() {
            tables.publish(c);
        }
        let policy = CloudPolicy {
            fallback_enabled: false,
            ..CloudPolicy::default()
        };
        let mut cloud = CloudNode::new(tables, policy);
        let mut rng = crate::sim::RngStream::new(0, "t");
        cloud.tick(SimTime::from_secs(200.0), &mut rng).unwrap();
        assert_eq!(cloud.pending_pairs(), 1);

        let mut target = FogNode::new("t", Point::new(500.0, 0.0));
        let ack = target
            .receive_carried("c", SimTime::from_secs(100.0), SimTime::from_secs(300.0))
            .unwrap();
        let actions = cloud.handle_message(&ack, SimTime::from_secs(300.05)).unwrap();
        assert!(matches!(&actions[0], Action::Resolved { .. }));
        assert_eq!(cloud.tables.version_at("t", "c"), Some(SimTime::from_secs(100.0)));
        assert!(cloud.tables.is_consistent());
        let recs = cloud.delivery_records();
        assert_eq!(recs[0].delivered_at, Some(SimTime::from_secs(300.0)));
        assert_eq!(recs[0].channel, Channel::Dtn);
    }

    #[test]
    fn fallback_pushes_when_no_carrier() {
        let mut tables = CloudTables::new(3);
        tables.add_fog_server("h", Point::new(0.0, 0.0));
        tables.add_fog_server("t", Point::new(500.0, 0.0));
        for (f, d) in [("h", 100.0), ("t", 0.0)] {
            tables
                .upsert_gc(GlobalContentEntry {
                    fog_server_id: f.into(),
                    content_id: "c".into(),
                    date_of_update: SimTime::from_secs(d),
                    validation_time_s: 0.0,
                })
                .unwrap();
        }
        for (_, c) in catalog() {
            tables.publish(c);
        }
        let mut cloud = CloudNode::new(tables, CloudPolicy::default());
        let mut rng = crate::sim::RngStream::new(0, "t");
        let actions = cloud.tick(SimTime::from_secs(200.0), &mut rng).unwrap();
        assert!(actions.iter().any(|a| matches!(a, Action::DirectPush { .. })));
        assert_eq!(cloud.pending_pairs(), 0);
        assert_eq!(cloud.counters.direct_pushes, 1);
    }
}
