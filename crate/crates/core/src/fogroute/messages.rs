use serde::{Deserialize, Serialize};

use crate::mobility::Point;
use crate::sim::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeId {
    Cloud,
    Fog(String),
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NodeId::Cloud => f.write_str("cloud"),
            NodeId::Fog(id) => f.write_str(id),
        }
    }
}

/// A finished device contact, reported to the cloud in the next Hello.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactReport {
    pub device_id: String,
    pub start: SimTime,
    pub end: SimTime,
    /// Device position when the contact began.
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttachedDevice {
    pub device_id: String,
    pub position: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclineReason {
    /// None of the named carriers is attached any more.
    NoCarrierAttached,
    /// Carriers are attached but leave before the upload completes.
    ContactTooShort,
    /// The server does not hold the requested version.
    NotHeld,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissemMessage {
    /// Periodic fog-to-cloud status.
    Hello {
        content_ids: Vec<String>,
        attached: Vec<AttachedDevice>,
        contacts: Vec<ContactReport>,
    },
    /// Cloud asks a holder to hand `content_id` to `carriers`.
    DataDissemRequest {
        content_id: String,
        target_fog_id: String,
        carriers: Vec<String>,
    },
    DataDissemAccept {
        content_id: String,
        target_fog_id: String,
        carriers: Vec<String>,
    },
    DataDissemDecline {
        content_id: String,
        target_fog_id: String,
        reason: DeclineReason,
    },
    /// Target tells the cloud it received `content_id` through a carrier.
    DataDissemAck {
        content_id: String,
        date_of_update: SimTime,
    },
}

impl DissemMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            DissemMessage::Hello { .. } => "hello",
            DissemMessage::DataDissemRequest { .. } => "request",
            DissemMessage::DataDissemAccept { .. } => "accept",
            DissemMessage::DataDissemDecline { .. } => "decline",
            DissemMessage::DataDissemAck { .. } => "ack",
        }
    }

    pub fn device_ids(&self) -> Vec<&str> {
        match self {
            DissemMessage::Hello { attached, .. } => attached.iter().map(|a| a.device_id.as_str()).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub sent_at: SimTime,
    pub message: DissemMessage,
}
