use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CvfhError, ResponderKind};
use crate::metrics::Scheme;
use crate::sim::SimTime;

/// Packet counts and timing of the handoff exchanges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkParams {
    pub n_vv: u32,
    pub n_vi: u32,
    pub n_80211: u32,
    pub t_pkt_vv_s: f64,
    pub t_pkt_vi_s: f64,
    pub pe_vv: f64,
    pub pe_vi: f64,
    pub t_auth_s: f64,
    pub t_asso_s: f64,
    /// Retransmissions allowed per packet.
    pub retry_budget: u32,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            n_vv: 3,
            n_vi: 3,
            n_80211: 8,
            t_pkt_vv_s: 0.002,
            t_pkt_vi_s: 0.002,
            pe_vv: 0.01,
            pe_vi: 0.01,
            t_auth_s: 0.05,
            t_asso_s: 0.05,
            retry_budget: 3,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<(), CvfhError> {
        for (name, v) in [("pe_vv", self.pe_vv), ("pe_vi", self.pe_vi)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CvfhError::InvalidConfig(format!("{name} must be in [0, 1]")));
            }
        }
        for (name, v) in [
            ("t_pkt_vv_s", self.t_pkt_vv_s),
            ("t_pkt_vi_s", self.t_pkt_vi_s),
            ("t_auth_s", self.t_auth_s),
            ("t_asso_s", self.t_asso_s),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CvfhError::InvalidConfig(format!("{name} must be >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PacketCounts {
    /// Transmissions including retries.
    pub v2v: u32,
    pub v2i: u32,
}

/// Where the time between losing the old link and holding the new one went.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub wireless_s: f64,
    pub auth_s: f64,
    pub assoc_s: f64,
    /// Full reassociation after a neighbor-assisted attempt failed.
    pub fallback_s: f64,
    /// No access point in range.
    pub waiting_s: f64,
}

impl LatencyBreakdown {
    pub fn total(&self) -> f64 {
        self.wireless_s + self.auth_s + self.assoc_s + self.fallback_s + self.waiting_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoffResult {
    pub cv_id: String,
    pub scheme: Scheme,
    /// Start of the outage.
    pub trigger_time: SimTime,
    pub completion_time: SimTime,
    pub success: bool,
    pub packets_exchanged: PacketCounts,
    pub latency: LatencyBreakdown,
}

impl HandoffResult {
    pub fn delay_s(&self) -> f64 {
        self.completion_time - self.trigger_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exchange {
    pub elapsed_s: f64,
    pub transmissions: u32,
    pub success: bool,
}

/// `n` packets in sequence, each retried up to `retry_budget` times.
/// Stops at the first packet that exhausts its budget.
pub fn exchange<R: Rng>(n: u32, t_pkt_s: f64, pe: f64, retry_budget: u32, rng: &mut R) -> Exchange {
    let mut tx = 0;
    for _ in 0..n {
        let mut delivered = false;
        for _ in 0..=retry_budget {
            tx += 1;
            if !rng.random_bool(pe) {
                delivered = true;
                break;
            }
        }
        if !delivered {
            return Exchange {
                elapsed_s: f64::from(tx) * t_pkt_s,
                transmissions: tx,
                success: false,
            };
        }
    }
    Exchange {
        elapsed_s: f64::from(tx) * t_pkt_s,
        transmissions: tx,
        success: true,
    }
}

/// One 802.11 handoff attempt starting at `start`: the packet exchange, then
/// authentication and association when every packet got through.
pub fn handoff_80211<R: Rng>(cv_id: &str, start: SimTime, params: &LinkParams, rng: &mut R) -> HandoffResult {
    let ex = exchange(
        params.n_80211,
        params.t_pkt_vi_s,
        params.pe_vi,
        params.retry_budget,
        rng,
    );
    let (auth, assoc) = if ex.success {
        (params.t_auth_s, params.t_asso_s)
    } else {
        (0.0, 0.0)
    };
    let latency = LatencyBreakdown {
        wireless_s: ex.elapsed_s,
        auth_s: auth,
        assoc_s: assoc,
        ..LatencyBreakdown::default()
    };
    HandoffResult {
        cv_id: cv_id.to_string(),
        scheme: Scheme::Ieee80211,
        trigger_time: start,
        completion_time: start + latency.total(),
        success: ex.success,
        packets_exchanged: PacketCounts {
            v2v: 0,
            v2i: ex.transmissions,
        },
        latency,
    }
}

/// Neighbor-assisted switch to a known TAP: V-V packets through the NAV when
/// a vehicle supplied the TAP, then V-I packets with the TAP. No
/// authentication or association.
pub fn handoff_cvfh<R: Rng>(
    cv_id: &str,
    start: SimTime,
    via: ResponderKind,
    params: &LinkParams,
    rng: &mut R,
) -> HandoffResult {
    let vv = match via {
        ResponderKind::Vehicle => exchange(params.n_vv, params.t_pkt_vv_s, params.pe_vv, params.retry_budget, rng),
        ResponderKind::Ap => Exchange {
            elapsed_s: 0.0,
            transmissions: 0,
            success: true,
        },
    };
    let vi = if vv.success {
        exchange(params.n_vi, params.t_pkt_vi_s, params.pe_vi, params.retry_budget, rng)
    } else {
        Exchange {
            elapsed_s: 0.0,
            transmissions: 0,
            success: false,
        }
    };
    let latency = LatencyBreakdown {
        wireless_s: vv.elapsed_s + vi.elapsed_s,
        ..LatencyBreakdown::default()
    };
    HandoffResult {
        cv_id: cv_id.to_string(),
        scheme: Scheme::Cvfh,
        trigger_time: start,
        completion_time: start + latency.total(),
        success: vv.success && vi.success,
        packets_exchanged: PacketCounts {
            v2v: vv.transmissions,
            v2i: vi.transmissions,
        },
        latency,
    }
}
