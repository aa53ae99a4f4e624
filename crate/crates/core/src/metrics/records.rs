use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::sim::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Dtn,
    CloudDirect,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Dtn => "dtn",
            Channel::CloudDirect => "cloud_direct",
        }
    }
}

/// One (content, target) dissemination task. `channel` is the channel that
/// delivered it, or `Dtn` while it is still outstanding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub content_id: String,
    pub target_fog_id: String,
    pub requested_at: SimTime,
    pub delivered_at: Option<SimTime>,
    pub channel: Channel,
}

impl DeliveryRecord {
    pub fn delay(&self) -> Option<f64> {
        self.delivered_at.map(|d| d - self.requested_at)
    }
}

/// Fraction of records delivered within `expected_delay` seconds of their
/// request. Cloud deliveries count only with `include_cloud`.
pub fn delivery_ratio(
    records: &[DeliveryRecord],
    expected_delay: f64,
    include_cloud: bool,
) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = records
        .iter()
        .filter(|r| include_cloud || r.channel == Channel::Dtn)
        .filter(|r| r.delay().is_some_and(|d| d <= expected_delay))
        .count();
    Ok(hits as f64 / records.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub fog_server_id: String,
    pub contents_required: usize,
    pub contents_received: usize,
    /// Start of the dissemination the duration is measured from.
    pub since: SimTime,
    pub converged_at: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    /// (server, seconds to converge), ascending by duration then server.
    pub durations: Vec<(String, f64)>,
    pub unconverged: Vec<String>,
}

impl ConvergenceSummary {
    pub fn unconverged_count(&self) -> usize {
        self.unconverged.len()
    }

    /// Empirical CDF over all servers, unconverged ones counted in the
    /// denominator, so the curve tops out below 1 when some never converge.
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        let total = (self.durations.len() + self.unconverged.len()) as f64;
        self.durations
            .iter()
            .enumerate()
            .map(|(i, (_, d))| (*d, (i + 1) as f64 / total))
            .collect()
    }
}

pub fn convergence_times(records: &[ConvergenceRecord]) -> ConvergenceSummary {
    let mut durations = Vec::new();
    let mut unconverged = Vec::new();
    for r in records {
        debug_assert!(r.contents_received <= r.contents_required);
        match r.converged_at {
            Some(t) => durations.push((r.fog_server_id.clone(), t - r.since)),
            None => unconverged.push(r.fog_server_id.clone()),
        }
    }
    durations.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    unconverged.sort();
    ConvergenceSummary { durations, unconverged }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Cvfh,
    Ieee80211,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Cvfh => "cvfh",
            Scheme::Ieee80211 => "ieee80211",
        }
    }
}

/// Flattened handoff outcome as it appears in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoffSample {
    pub scheme: Scheme,
    pub speed_mps: f64,
    pub packet_rate: f64,
    pub delay_s: f64,
    pub success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Speed,
    PacketRate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HandoffStats {
    pub key: f64,
    pub scheme: Scheme,
    pub count: usize,
    pub successes: usize,
    /// Over successful handoffs; `None` when there are none.
    pub mean_delay_s: Option<f64>,
    /// Population standard deviation over successful handoffs.
    pub std_delay_s: Option<f64>,
    pub failure_rate: f64,
}

/// Per (group key, scheme) delay statistics, ascending by key then scheme.
pub fn handoff_delay_stats(samples: &[HandoffSample], group_by: GroupBy) -> Result<Vec<HandoffStats>, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut groups: BTreeMap<(u64, Scheme), (f64, Vec<&HandoffSample>)> = BTreeMap::new();
    for s in samples {
        let key = match group_by {
            GroupBy::Speed => s.speed_mps,
            GroupBy::PacketRate => s.packet_rate,
        };
        groups
            .entry((order_key(key), s.scheme))
            .or_insert_with(|| (key, Vec::new()))
            .1
            .push(s);
    }
    Ok(groups
        .into_values()
        .map(|(key, members)| {
            let delays: Vec<f64> = members.iter().filter(|s| s.success).map(|s| s.delay_s).collect();
            let n = delays.len() as f64;
            let mean = (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / n);
            let std = mean.map(|m| (delays.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / n).sqrt());
            HandoffStats {
                key,
                scheme: members[0].scheme,
                count: members.len(),
                successes: delays.len(),
                mean_delay_s: mean,
                std_delay_s: std,
                failure_rate: 1.0 - delays.len() as f64 / members.len() as f64,
            }
        })
        .collect())
}

/// Monotone map from f64 to u64 so float keys sort numerically in a BTreeMap.
fn order_key(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRecord {
    pub vehicle_id: String,
    pub bits_delivered: u64,
    pub window_start: SimTime,
    pub window_end: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputSummary {
    /// (vehicle, bits/s), ascending by vehicle id.
    pub per_vehicle: Vec<(String, f64)>,
    pub aggregate: f64,
}

pub fn throughput(records: &[ThroughputRecord], duration_s: f64) -> Result<ThroughputSummary, MetricsError> {
    if !(duration_s > 0.0) {
        return Err(MetricsError::NonPositiveDuration(duration_s));
    }
    let mut per: BTreeMap<&str, u64> = BTreeMap::new();
    for r in records {
        *per.entry(&r.vehicle_id).or_default() += r.bits_delivered;
    }
    let per_vehicle: Vec<(String, f64)> = per
        .into_iter()
        .map(|(id, bits)| (id.to_string(), bits as f64 / duration_s))
        .collect();
    let aggregate = per_vehicle.iter().map(|(_, b)| b).sum();
    Ok(ThroughputSummary { per_vehicle, aggregate })
}
