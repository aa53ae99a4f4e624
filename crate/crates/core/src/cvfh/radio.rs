use serde::{Deserialize, Serialize};

use super::CvfhError;

/// Log-distance path loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioConfig {
    pub tx_power_dbm: f64,
    pub path_loss_exponent: f64,
    pub reference_distance_m: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            tx_power_dbm: 20.0,
            path_loss_exponent: 3.0,
            reference_distance_m: 1.0,
        }
    }
}

/// `P_tx - 10 n log10(d / d0)`.
pub fn rssi_model(distance_m: f64, config: &RadioConfig) -> Result<f64, CvfhError> {
    if !(distance_m > 0.0) {
        return Err(CvfhError::InvalidDistance(distance_m));
    }
    Ok(config.tx_power_dbm - 10.0 * config.path_loss_exponent * (distance_m / config.reference_distance_m).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PlrMode {
    /// `p_min` inside `0.8 R`, linear up to 1 at `R`, 1 beyond.
    Ramp {
        p_min: f64,
    },
    Constant {
        pe: f64,
    },
}

impl Default for PlrMode {
    fn default() -> Self {
        PlrMode::Ramp { p_min: 0.02 }
    }
}

pub fn plr_model(distance_m: f64, range_m: f64, mode: PlrMode) -> f64 {
    match mode {
        PlrMode::Constant { pe } => pe,
        PlrMode::Ramp { p_min } => {
            let knee = 0.8 * range_m;
            if distance_m <= knee {
                p_min
            } else if distance_m >= range_m {
                1.0
            } else {
                p_min + (distance_m - knee) / (range_m - knee) * (1.0 - p_min)
            }
        }
    }
}

/// Exponentially weighted loss rate over per-packet outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlrEstimator {
    weight: f64,
    value: f64,
}

impl PlrEstimator {
    pub fn new(weight: f64) -> Self {
        PlrEstimator { weight, value: 0.0 }
    }

    pub fn observe(&mut self, lost: bool) {
        let x = if lost { 1.0 } else { 0.0 };
        self.value += self.weight * (x - self.value);
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn reset(&mut self) {
        self.value = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rssi_at_reference_and_decade() {
        let c = RadioConfig {
            tx_power_dbm: 15.0,
            path_loss_exponent: 2.0,
            reference_distance_m: 1.0,
        };
        assert_relative_eq!(rssi_model(1.0, &c).unwrap(), 15.0);
        assert_relative_eq!(rssi_model(10.0, &c).unwrap(), -5.0, epsilon = 1e-12);
        assert!(rssi_model(3.0, &c).unwrap() > rssi_model(3.1, &c).unwrap());
        assert!(rssi_model(0.0, &c).is_err());
        assert!(rssi_model(-1.0, &c).is_err());
    }

    #[test]
    fn plr_shapes() {
        assert_eq!(plr_model(50.0, 100.0, PlrMode::Constant { pe: 0.1 }), 0.1);
        assert_eq!(plr_model(100.0, 100.0, PlrMode::Ramp { p_min: 0.05 }), 1.0);
        assert_relative_eq!(
            plr_model(90.0, 100.0, PlrMode::Ramp { p_min: 0.05 }),
            0.525,
            epsilon = 1e-12
        );
        assert_eq!(plr_model(10.0, 100.0, PlrMode::Ramp { p_min: 0.05 }), 0.05);
    }

    #[test]
    fn ewma_tracks_outcomes() {
        let mut e = PlrEstimator::new(0.1);
        e.observe(true);
        assert_relative_eq!(e.value(), 0.1);
        for _ in 0..200 {
            e.observe(true);
        }
        assert!(e.value() > 0.99 && e.value() <= 1.0);
        for _ in 0..200 {
            e.observe(false);
        }
        assert!(e.value() < 0.01 && e.value() >= 0.0);
    }
}
