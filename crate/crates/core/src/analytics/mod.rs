//! Closed-form handoff model: the 802.11 baseline, Poisson road occupancy, the
//! three neighbor-assisted cases and their blend, plus a Monte-Carlo oracle.
//!
//! Two formula variants exist for the occupancy tails. `Corrected` uses the
//! Poisson tail on the effective interval throughout. `AsWritten` keeps the
//! literal expressions, where the first coefficient uses the full range `R`;
//! that form leaves [0, 1] when `L < R` and is then reported as a
//! [`AnalyticsError::VariantInconsistency`] instead of being clamped.

mod formulas;
mod montecarlo;
mod sweep;

pub use formulas::{
    effective_length, latency_80211, p_cvfh, p_opposite, p_same_dir_faster, p_same_dir_slower, p_vehicle_assisted,
    poisson_pmf, poisson_tail_two, prob_80211, prob_at_least_one_in_range, prob_at_least_two_in_range,
    prob_opposite_vi, prob_slower_vv, success_prob_link, t_ap, t_cvfh, t_wl,
};
pub use montecarlo::{monte_carlo, monte_carlo_handoff, McEstimate, McQuantity, MC_CHUNK};
pub use sweep::{sweep_rows, write_sweep_csv, SweepRow};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaVariant {
    AsWritten,
    #[default]
    Corrected,
}

impl FormulaVariant {
    pub const ALL: [FormulaVariant; 2] = [FormulaVariant::AsWritten, FormulaVariant::Corrected];

    pub fn as_str(self) -> &'static str {
        match self {
            FormulaVariant::AsWritten => "as_written",
            FormulaVariant::Corrected => "corrected",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParams {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("effective length {length_m} m is negative")]
    Domain { length_m: f64 },
    #[error("speed difference {delta_v} m/s does not fit this scenario ({expected})")]
    WrongScenario { delta_v: f64, expected: &'static str },
    #[error("{quantity} evaluates to {value} under the {variant} variant")]
    VariantInconsistency {
        quantity: &'static str,
        variant: &'static str,
        value: f64,
    },
    #[error("need at least {min} trials, got {got}")]
    TooFewTrials { min: u64, got: u64 },
    #[error("unknown sweep parameter `{0}`")]
    UnknownParam(String),
    #[error("csv error: {0}")]
    Csv(String),
}

/// Inputs to every closed-form quantity. Speeds in m/s, times in seconds,
/// `lambda_per_m` in vehicles per meter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticParams {
    pub lambda_per_m: f64,
    pub range_m: f64,
    pub v_cv_mps: f64,
    pub v_nav_mps: f64,
    pub t_pkt_vv_s: f64,
    pub t_pkt_vi_s: f64,
    pub n_vv: u32,
    pub n_vi: u32,
    pub n_80211: u32,
    pub pe_vv: f64,
    pub pe_vi: f64,
    pub t_auth_s: f64,
    pub t_asso_s: f64,
    /// Probability that the assisting neighbor drives the opposite way.
    pub p0: f64,
    /// Probability of a negative speed difference given the same direction.
    pub p1: f64,
    /// Probability that the reply comes from an access point.
    pub p_ap: f64,
}

impl Default for AnalyticParams {
    fn default() -> Self {
        AnalyticParams {
            lambda_per_m: 0.01,
            range_m: 250.0,
            v_cv_mps: 25.0,
            v_nav_mps: 20.0,
            t_pkt_vv_s: 0.002,
            t_pkt_vi_s: 0.002,
            n_vv: 3,
            n_vi: 3,
            n_80211: 8,
            pe_vv: 0.01,
            pe_vi: 0.01,
            t_auth_s: 0.05,
            t_asso_s: 0.05,
            p0: 0.3,
            p1: 0.5,
            p_ap: 0.3,
        }
    }
}

impl AnalyticParams {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        let non_negative = [
            ("lambda_per_m", self.lambda_per_m),
            ("range_m", self.range_m),
            ("v_cv_mps", self.v_cv_mps),
            ("v_nav_mps", self.v_nav_mps),
            ("t_pkt_vv_s", self.t_pkt_vv_s),
            ("t_pkt_vi_s", self.t_pkt_vi_s),
            ("t_auth_s", self.t_auth_s),
            ("t_asso_s", self.t_asso_s),
        ];
        for (name, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(AnalyticsError::InvalidParams {
                    name,
                    value,
                    reason: "must be finite and >= 0",
                });
            }
        }
        let probs = [
            ("pe_vv", self.pe_vv),
            ("pe_vi", self.pe_vi),
            ("p0", self.p0),
            ("p1", self.p1),
            ("p_ap", self.p_ap),
        ];
        for (name, value) in probs {
            if !(0.0..=1.0).contains(&value) {
                return Err(AnalyticsError::InvalidParams {
                    name,
                    value,
                    reason: "must lie in [0, 1]",
                });
            }
        }
        Ok(())
    }
}
