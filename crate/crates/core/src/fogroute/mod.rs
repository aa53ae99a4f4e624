//! Cloud-coordinated content dissemination among fog servers, using mobile
//! devices as store-carry-forward carriers and a direct cloud push as backup.
//!
//! The cloud keeps three tables (global content, fog servers, device movement
//! patterns), finds out-of-date copies, picks carriers and drives the
//! Request / Accept / Decline / Ack exchange. Fog servers report through
//! periodic Hello messages. Everything runs inside kernel event handlers.

mod content;
mod messages;
mod nodes;
mod plan;
mod selection;
mod sim;
mod tables;

pub use content::{carrier_transport, Content};
pub use messages::{AttachedDevice, ContactReport, DeclineReason, DissemMessage, Envelope, NodeId};
pub use nodes::{Action, CloudNode, CloudPolicy, FogNode, MessageCounters, Ordering};
pub use plan::{plan_dissemination, Plan, PushReason};
pub use selection::{
    delivery_probability, gather_candidates, select_carriers, select_carriers_from, Candidate, CarrierAssignment,
    SelectionPolicy,
};
pub use sim::{run_fogroute, FogRouteConfig, FogRouteOutcome, FogRouteScenario};
pub use tables::{detect_stale, CloudTables, FogServerEntry, GlobalContentEntry, MdmpEntry};

use thiserror::Error;

use crate::mobility::MobilityError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum FogRouteError {
    #[error("unknown content `{0}`")]
    UnknownContent(String),
    #[error("unknown fog server `{0}`")]
    UnknownFogServer(String),
    #[error("{node} cannot handle a {message} message")]
    WrongRole { node: String, message: &'static str },
    #[error("message for {receiver} delivered to {node}")]
    Misaddressed { node: String, receiver: String },
    #[error("no device passes the connection-time filter")]
    NoEligibleCarriers,
    #[error("carrier selection produced no carriers")]
    EmptyAssignment,
    #[error("invalid candidates: {0}")]
    InvalidCandidates(String),
    #[error("invalid content: {0}")]
    InvalidContent(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
