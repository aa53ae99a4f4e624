use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use super::formulas::{self, effective_length};
use super::{AnalyticParams, AnalyticsError, FormulaVariant};
use crate::sim::RngStream;

/// Trials per parallel chunk. Each chunk draws from its own substream, so the
/// estimate does not depend on the thread count.
pub const MC_CHUNK: u64 = 1 << 16;

const MIN_TRIALS: u64 = 10_000;

/// Event sampled by the oracle. Each variant mirrors one closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum McQuantity {
    Baseline80211,
    AtLeastTwoInRange,
    AtLeastOneInRange,
    LinkVv,
    LinkVi,
    SameDirSlower,
    SameDirFaster,
    OppositeVi,
    Opposite,
    VehicleAssisted,
    Cvfh,
}

impl McQuantity {
    pub const ALL: [McQuantity; 11] = [
        McQuantity::Baseline80211,
        McQuantity::AtLeastTwoInRange,
        McQuantity::AtLeastOneInRange,
        McQuantity::LinkVv,
        McQuantity::LinkVi,
        McQuantity::SameDirSlower,
        McQuantity::SameDirFaster,
        McQuantity::OppositeVi,
        McQuantity::Opposite,
        McQuantity::VehicleAssisted,
        McQuantity::Cvfh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            McQuantity::Baseline80211 => "prob_80211",
            McQuantity::AtLeastTwoInRange => "p_vv_two_in_range",
            McQuantity::AtLeastOneInRange => "p_vv_in_range",
            McQuantity::LinkVv => "ps_vv",
            McQuantity::LinkVi => "ps_vi",
            McQuantity::SameDirSlower => "p_same_slower",
            McQuantity::SameDirFaster => "p_same_faster",
            McQuantity::OppositeVi => "p_vi_opposite",
            McQuantity::Opposite => "p_opposite",
            McQuantity::VehicleAssisted => "p_vehicle_assisted",
            McQuantity::Cvfh => "p_cvfh",
        }
    }

    /// Corrected-variant closed form of the same event.
    pub fn closed_form(self, p: &AnalyticParams) -> Result<f64, AnalyticsError> {
        let v = FormulaVariant::Corrected;
        let links = formulas::success_prob_link(p.pe_vv, p.n_vv) * formulas::success_prob_link(p.pe_vi, p.n_vi);
        Ok(match self {
            McQuantity::Baseline80211 => formulas::prob_80211(p),
            McQuantity::AtLeastTwoInRange => formulas::prob_at_least_two_in_range(p, v)?,
            McQuantity::AtLeastOneInRange => formulas::prob_at_least_one_in_range(p),
            McQuantity::LinkVv => formulas::success_prob_link(p.pe_vv, p.n_vv),
            McQuantity::LinkVi => formulas::success_prob_link(p.pe_vi, p.n_vi),
            McQuantity::SameDirSlower => formulas::prob_slower_vv(p, v)? * links,
            McQuantity::SameDirFaster => formulas::prob_at_least_one_in_range(p) * links,
            McQuantity::OppositeVi => formulas::prob_opposite_vi(p, v)?,
            McQuantity::Opposite => formulas::p_opposite(p, v)?,
            McQuantity::VehicleAssisted => formulas::p_vehicle_assisted(p, v)?,
            McQuantity::Cvfh => formulas::p_cvfh(p, v)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub probability: f64,
    /// Binomial standard error of the empirical fraction.
    pub std_error: f64,
    pub trials: u64,
    pub successes: u64,
}

impl McEstimate {
    /// Standard error of a fraction over `trials` draws whose true success
    /// probability is `p`. Useful when the empirical fraction sits at 0 or 1.
    pub fn std_error_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

struct Count(Option<Poisson<f64>>);

impl Count {
    fn new(mu: f64) -> Self {
        Count(Poisson::new(mu).ok().filter(|_| mu > 0.0))
    }

    fn at_least_two<R: Rng>(&self, rng: &mut R) -> bool {
        self.0.as_ref().is_some_and(|d| d.sample(rng) >= 2.0)
    }
}

struct Model {
    pe_vv: f64,
    pe_vi: f64,
    n_vv: u32,
    n_vi: u32,
    n_80211: u32,
    p0: f64,
    p1: f64,
    p_ap: f64,
    /// Occupancy counts on the full range, the slower-case interval, the
    /// literal-ΔV interval and the opposite-direction interval.
    range: Count,
    slower: Count,
    literal: Count,
    opposite: Option<Count>,
}

fn interval(p: &AnalyticParams, delta_v: f64) -> Result<Count, AnalyticsError> {
    let length_m = effective_length(p, delta_v);
    if length_m < 0.0 {
        return Err(AnalyticsError::Domain { length_m });
    }
    Ok(Count::new(length_m * p.lambda_per_m))
}

impl Model {
    fn new(p: &AnalyticParams, q: McQuantity) -> Result<Self, AnalyticsError> {
        let needs_opposite = matches!(
            q,
            McQuantity::OppositeVi | McQuantity::Opposite | McQuantity::VehicleAssisted | McQuantity::Cvfh
        );
        let literal = if q == McQuantity::AtLeastTwoInRange {
            interval(p, p.v_cv_mps - p.v_nav_mps)?
        } else {
            Count(None)
        };
        Ok(Model {
            pe_vv: p.pe_vv,
            pe_vi: p.pe_vi,
            n_vv: p.n_vv,
            n_vi: p.n_vi,
            n_80211: p.n_80211,
            p0: p.p0,
            p1: p.p1,
            p_ap: p.p_ap,
            range: Count::new(p.range_m * p.lambda_per_m),
            slower: interval(p, -(p.v_cv_mps - p.v_nav_mps).abs())?,
            literal,
            opposite: if needs_opposite {
                Some(interval(p, p.v_cv_mps + p.v_nav_mps)?)
            } else {
                None
            },
        })
    }

    fn link<R: Rng>(rng: &mut R, pe: f64, n: u32) -> bool {
        (0..n).all(|_| !rng.random_bool(pe))
    }

    fn links<R: Rng>(&self, rng: &mut R) -> bool {
        Self::link(rng, self.pe_vv, self.n_vv) && Self::link(rng, self.pe_vi, self.n_vi)
    }

    fn opposite_vi<R: Rng>(&self, rng: &mut R) -> bool {
        self.opposite.as_ref().is_some_and(|c| c.at_least_two(rng))
    }

    fn opposite<R: Rng>(&self, rng: &mut R) -> bool {
        self.range.at_least_two(rng) && self.opposite_vi(rng) && self.links(rng)
    }

    fn slower<R: Rng>(&self, rng: &mut R) -> bool {
        self.slower.at_least_two(rng) && self.links(rng)
    }

    fn faster<R: Rng>(&self, rng: &mut R) -> bool {
        self.range.at_least_two(rng) && self.links(rng)
    }

    fn vehicle_assisted<R: Rng>(&self, rng: &mut R) -> bool {
        if rng.random_bool(self.p0) {
            self.opposite(rng)
        } else if rng.random_bool(self.p1) {
            self.slower(rng)
        } else {
            self.faster(rng)
        }
    }

    fn trial<R: Rng>(&self, q: McQuantity, rng: &mut R) -> bool {
        match q {
            McQuantity::Baseline80211 => Self::link(rng, self.pe_vi, self.n_80211),
            McQuantity::AtLeastTwoInRange => self.literal.at_least_two(rng),
            McQuantity::AtLeastOneInRange => self.range.at_least_two(rng),
            McQuantity::LinkVv => Self::link(rng, self.pe_vv, self.n_vv),
            McQuantity::LinkVi => Self::link(rng, self.pe_vi, self.n_vi),
            McQuantity::SameDirSlower => self.slower(rng),
            McQuantity::SameDirFaster => self.faster(rng),
            McQuantity::OppositeVi => self.opposite_vi(rng),
            McQuantity::Opposite => self.opposite(rng),
            McQuantity::VehicleAssisted => self.vehicle_assisted(rng),
            McQuantity::Cvfh => {
                if rng.random_bool(self.p_ap) {
                    Self::link(rng, self.pe_vi, self.n_vi)
                } else {
                    self.vehicle_assisted(rng)
                }
            }
        }
    }
}

/// Empirical frequency of `quantity` over `trials` independent draws.
pub fn monte_carlo(
    p: &AnalyticParams,
    quantity: McQuantity,
    trials: u64,
    stream: &RngStream,
) -> Result<McEstimate, AnalyticsError> {
    if trials < MIN_TRIALS {
        return Err(AnalyticsError::TooFewTrials {
            min: MIN_TRIALS,
            got: trials,
        });
    }
    p.validate()?;
    let model = Model::new(p, quantity)?;
    let chunks = trials.div_ceil(MC_CHUNK);
    let successes: u64 = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let n = MC_CHUNK.min(trials - i * MC_CHUNK);
            let mut rng = stream.substream(format!("{}/{i}", quantity.name()));
            (0..n).filter(|_| model.trial(quantity, &mut rng)).count() as u64
        })
        .sum();
    let probability = successes as f64 / trials as f64;
    Ok(McEstimate {
        probability,
        std_error: (probability * (1.0 - probability) / trials as f64).sqrt(),
        trials,
        successes,
    })
}

/// Full handoff process: AP reply with `P_AP`, otherwise a neighbor-assisted
/// exchange whose case is drawn from `P_0` and `P_1`.
pub fn monte_carlo_handoff(p: &AnalyticParams, trials: u64, stream: &RngStream) -> Result<McEstimate, AnalyticsError> {
    monte_carlo(p, McQuantity::Cvfh, trials, stream)
}
