use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::MobilityError;

/// Poisson vehicle flow on a straight road.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighwayFlowParams {
    /// Mean linear density, vehicles per meter.
    pub lambda_per_m: f64,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    /// Probability that a vehicle travels opposite to the reference direction.
    pub opposite_prob: f64,
    pub road_length_m: f64,
}

impl HighwayFlowParams {
    pub fn validate(&self) -> Result<(), MobilityError> {
        let bad = |msg: &str| Err(MobilityError::InvalidParams(msg.to_string()));
        if !(self.lambda_per_m >= 0.0 && self.lambda_per_m.is_finite()) {
            return bad("lambda must be finite and non-negative");
        }
        if !(self.speed_min_mps >= 0.0 && self.speed_min_mps <= self.speed_max_mps) {
            return bad("speed range must satisfy 0 <= min <= max");
        }
        if !(0.0..=1.0).contains(&self.opposite_prob) {
            return bad("opposite-direction probability must be in [0, 1]");
        }
        if !(self.road_length_m >= 0.0) {
            return bad("road length must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Opposite,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Opposite => -1.0,
        }
    }
}

/// Initial state of one sampled vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighwayVehicle {
    /// Position along the road, meters from its start.
    pub position_m: f64,
    pub direction: Direction,
    pub speed_mps: f64,
}

/// Vehicle count ~ Poisson(lambda * length), positions uniform, direction opposite
/// with `opposite_prob`, speeds uniform over the range. Sorted by position.
pub fn sample_highway<R: Rng>(params: &HighwayFlowParams, rng: &mut R) -> Result<Vec<HighwayVehicle>, MobilityError> {
    params.validate()?;
    let mean = params.lambda_per_m * params.road_length_m;
    let count = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| MobilityError::InvalidParams(e.to_string()))?
            .sample(rng) as usize
    } else {
        0
    };
    let mut vehicles: Vec<HighwayVehicle> = (0..count)
        .map(|_| {
            let position_m = rng.random::<f64>() * params.road_length_m;
            let direction = if rng.random_bool(params.opposite_prob) {
                Direction::Opposite
            } else {
                Direction::Forward
            };
            let speed_mps = if params.speed_max_mps > params.speed_min_mps {
                rng.random_range(params.speed_min_mps..=params.speed_max_mps)
            } else {
                params.speed_min_mps
            };
            HighwayVehicle {
                position_m,
                direction,
                speed_mps,
            }
        })
        .collect();
    vehicles.sort_by(|a, b| a.position_m.total_cmp(&b.position_m));
    Ok(vehicles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::RngStream;

    fn params(lambda: f64, p0: f64) -> HighwayFlowParams {
        HighwayFlowParams {
            lambda_per_m: lambda,
            speed_min_mps: 20.0,
            speed_max_mps: 25.0,
            opposite_prob: p0,
            road_length_m: 400.0,
        }
    }

    #[test]
    fn zero_density_gives_no_vehicles() {
        let mut rng = RngStream::new(1, "hw");
        for _ in 0..100 {
            assert!(sample_highway(&params(0.0, 0.5), &mut rng).unwrap().is_empty());
        }
    }

    #[test]
    fn all_opposite_when_p0_is_one() {
        let mut rng = RngStream::new(2, "hw");
        let v = sample_highway(&params(0.05, 1.0), &mut rng).unwrap();
        assert!(!v.is_empty());
        assert!(v.iter().all(|h| h.direction == Direction::Opposite));
        assert!(v.iter().all(|h| (20.0..=25.0).contains(&h.speed_mps)));
        assert!(v.iter().all(|h| (0.0..=400.0).contains(&h.position_m)));
    }

    #[test]
    fn mean_count_close_to_lambda_length() {
        // lambda * L = 4
        let mut rng = RngStream::new(3, "hw");
        let p = HighwayFlowParams {
            lambda_per_m: 0.01,
            ..params(0.01, 0.3)
        };
        let n = 100_000;
        let total: usize = (0..n).map(|_| sample_highway(&p, &mut rng).unwrap().len()).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 4.0).abs() / 4.0 < 0.02, "mean {mean}");
    }

    #[test]
    fn invalid_params_rejected() {
        let mut rng = RngStream::new(4, "hw");
        let mut p = params(-1.0, 0.5);
        assert!(sample_highway(&p, &mut rng).is_err());
        p = params(0.1, 1.5);
        assert!(sample_highway(&p, &mut rng).is_err());
        p = params(0.1, 0.5);
        p.speed_min_mps = 30.0;
        assert!(sample_highway(&p, &mut rng).is_err());
    }
}
