//! Neighbor-assisted access-point handoff on a highway, with a plain 802.11
//! handoff as the baseline.
//!
//! A vehicle watches RSSI and loss against its serving AP. When the signal
//! keeps falling and loss passes a threshold it asks one-hop neighbors for a
//! target AP; the best-placed neighbor answers first and the rest stay quiet.
//! With the target known in advance the switch skips authentication and
//! association.

mod handoff;
mod protocol;
mod radio;
mod sim;

pub use handoff::{
    exchange, handoff_80211, handoff_cvfh, Exchange, HandoffResult, LatencyBreakdown, LinkParams, PacketCounts,
};
pub use protocol::{
    detect_trigger, execute_decision, neighbor_reply, neighbor_timer, process_reply, qualify_neighbor, AccessPoint,
    ExecuteDecision, HandoffTriggerConfig, NeighborMessage, ReplyOutcome, ResponderKind, TapInfo, VehicleState,
};
pub use radio::{plr_model, rssi_model, PlrEstimator, PlrMode, RadioConfig};
pub use sim::{run_highway, CvfhConfig, HighwayOutcome, NeighborStats};

use thiserror::Error;

use crate::mobility::MobilityError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum CvfhError {
    #[error("distance must be positive, got {0}")]
    InvalidDistance(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown access point `{0}`")]
    UnknownAp(String),
    #[error("reply from {0} lacks complete TAP information")]
    IncompleteTapInfo(String),
    #[error("unexpected message: {0}")]
    UnexpectedMessage(&'static str),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
