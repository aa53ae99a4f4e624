use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use super::SimError;

/// Simulation clock value in seconds.
///
/// Always finite and non-negative, which is what makes the total order sound.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn try_from_secs(secs: f64) -> Result<Self, SimError> {
        if secs.is_finite() && secs >= 0.0 {
            // normalise -0.0 so equal instants compare and print the same
            Ok(SimTime(secs + 0.0))
        } else {
            Err(SimError::InvalidTime(secs))
        }
    }

    /// Panics on negative or non-finite input, like `Duration::from_secs_f64`.
    pub fn from_secs(secs: f64) -> Self {
        match Self::try_from_secs(secs) {
            Ok(t) => t,
            Err(e) => panic!("{e}"),
        }
    }

    pub fn from_hours(hours: f64) -> Self {
        Self::from_secs(hours * 3600.0)
    }

    pub fn secs(self) -> f64 {
        self.0
    }

    pub fn max(self, other: SimTime) -> SimTime {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: SimTime) -> SimTime {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Eq for SimTime {}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl TryFrom<f64> for SimTime {
    type Error = SimError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        SimTime::try_from_secs(value)
    }
}

impl From<SimTime> for f64 {
    fn from(t: SimTime) -> f64 {
        t.0
    }
}

/// Advancing by a delay. Panics if the delay would make the clock negative.
impl Add<f64> for SimTime {
    type Output = SimTime;

    fn add(self, delay: f64) -> SimTime {
        SimTime::from_secs(self.0 + delay)
    }
}

impl Sub for SimTime {
    type Output = f64;

    fn sub(self, rhs: SimTime) -> f64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_nan() {
        assert!(SimTime::try_from_secs(-1.0).is_err());
        assert!(SimTime::try_from_secs(f64::NAN).is_err());
        assert!(SimTime::try_from_secs(f64::INFINITY).is_err());
        assert_eq!(SimTime::try_from_secs(-0.0).unwrap(), SimTime::ZERO);
    }

    #[test]
    fn arithmetic() {
        let t = SimTime::from_secs(2.5) + 1.5;
        assert_eq!(t.secs(), 4.0);
        assert_eq!(t - SimTime::from_secs(1.0), 3.0);
        assert_eq!(SimTime::from_hours(2.0).secs(), 7200.0);
    }

    #[test]
    fn serde_roundtrip_validates() {
        let t: SimTime = serde_json::from_str("12.5").unwrap();
        assert_eq!(t.secs(), 12.5);
        assert!(serde_json::from_str::<SimTime>("-3").is_err());
    }
}
