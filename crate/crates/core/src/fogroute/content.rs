use serde::{Deserialize, Serialize};

use super::FogRouteError;
use crate::sim::SimTime;

/// A versioned content item as the cloud knows it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Content {
    pub content_id: String,
    pub size_bytes: u64,
    /// Affordable delay `T_d`, seconds.
    pub affordable_delay_s: f64,
    pub date_of_update: SimTime,
    pub validation_time_s: f64,
}

impl Content {
    pub fn validate(&self) -> Result<(), FogRouteError> {
        if self.size_bytes == 0 {
            return Err(FogRouteError::InvalidContent(format!(
                "{}: size must be > 0",
                self.content_id
            )));
        }
        if !(self.affordable_delay_s > 0.0) {
            return Err(FogRouteError::InvalidContent(format!(
                "{}: affordable delay must be > 0",
                self.content_id
            )));
        }
        if !(self.validation_time_s >= 0.0) {
            return Err(FogRouteError::InvalidContent(format!(
                "{}: validation time must be >= 0",
                self.content_id
            )));
        }
        Ok(())
    }

    /// Seconds needed to move the content over a link of `uplink_bytes_per_s`.
    pub fn upload_time(&self, uplink_bytes_per_s: f64) -> f64 {
        self.size_bytes as f64 / uplink_bytes_per_s
    }
}

/// Whether a contact of `contact_s` seconds suffices to hand over `size_bytes`.
/// The boundary counts as success.
pub fn carrier_transport(size_bytes: u64, uplink_bytes_per_s: f64, contact_s: f64) -> bool {
    contact_s >= size_bytes as f64 / uplink_bytes_per_s
}
