use super::{AnalyticParams, AnalyticsError, FormulaVariant};

/// 802.11 handoff latency: `N_80211` V-I packet times plus authentication and
/// association.
pub fn latency_80211(p: &AnalyticParams) -> f64 {
    f64::from(p.n_80211) * p.t_pkt_vi_s + p.t_auth_s + p.t_asso_s
}

pub fn prob_80211(p: &AnalyticParams) -> f64 {
    success_prob_link(p.pe_vi, p.n_80211)
}

/// `mu^k e^-mu / k!`. Switches to log space above `k = 20`.
pub fn poisson_pmf(k: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k <= 20 {
        let mut term = (-mu).exp();
        for i in 1..=k {
            term *= mu / i as f64;
        }
        term
    } else {
        let ln_fact: f64 = (2..=k).map(|i| (i as f64).ln()).sum();
        (k as f64 * mu.ln() - mu - ln_fact).exp()
    }
}

/// `P(X >= 2)` for `X ~ Poisson(mu)`.
pub fn poisson_tail_two(mu: f64) -> f64 {
    if mu < 0.5 {
        // Series form keeps small tails positive and accurate.
        let mut term = mu * mu / 2.0;
        let mut sum = 0.0;
        let mut k = 2.0;
        while term > sum * 1e-18 && k < 60.0 {
            sum += term;
            k += 1.0;
            term *= mu / k;
        }
        sum * (-mu).exp()
    } else {
        1.0 - mu * (-mu).exp() - (-mu).exp()
    }
}

pub fn t_wl(p: &AnalyticParams) -> f64 {
    f64::from(p.n_vv) * p.t_pkt_vv_s + f64::from(p.n_vi) * p.t_pkt_vi_s
}

pub fn t_ap(p: &AnalyticParams) -> f64 {
    f64::from(p.n_vi) * p.t_pkt_vi_s
}

pub fn t_cvfh(p: &AnalyticParams) -> f64 {
    p.p_ap * t_ap(p) + (1.0 - p.p_ap) * t_wl(p)
}

pub fn success_prob_link(pe: f64, n: u32) -> f64 {
    (1.0 - pe).powi(n as i32)
}

/// `R - delta_v * T_wl`.
pub fn effective_length(p: &AnalyticParams, delta_v: f64) -> f64 {
    p.range_m - delta_v * t_wl(p)
}

fn tail_on_interval(
    p: &AnalyticParams,
    delta_v: f64,
    variant: FormulaVariant,
    quantity: &'static str,
) -> Result<f64, AnalyticsError> {
    let length_m = effective_length(p, delta_v);
    if length_m < 0.0 {
        return Err(AnalyticsError::Domain { length_m });
    }
    let mu = length_m * p.lambda_per_m;
    let value = match variant {
        FormulaVariant::Corrected => poisson_tail_two(mu),
        FormulaVariant::AsWritten => {
            let e = (-mu).exp();
            1.0 - p.range_m * p.lambda_per_m * e - e
        }
    };
    if !(0.0..=1.0).contains(&value) {
        return Err(AnalyticsError::VariantInconsistency {
            quantity,
            variant: variant.as_str(),
            value,
        });
    }
    Ok(value)
}

/// Two or more vehicles on the effective interval, with `ΔV = V_CV - V_NAV`
/// taken literally from the parameters.
pub fn prob_at_least_two_in_range(p: &AnalyticParams, variant: FormulaVariant) -> Result<f64, AnalyticsError> {
    tail_on_interval(p, p.v_cv_mps - p.v_nav_mps, variant, "P'_VV")
}

/// Occupancy factor of the slower-CV case. Only the magnitude of the speed
/// difference is read; the sign is the one this case requires.
pub fn prob_slower_vv(p: &AnalyticParams, variant: FormulaVariant) -> Result<f64, AnalyticsError> {
    tail_on_interval(p, -(p.v_cv_mps - p.v_nav_mps).abs(), variant, "P'_VV")
}

/// V-I occupancy factor of the opposite-direction case, `ΔV = V_CV + V_NAV`.
pub fn prob_opposite_vi(p: &AnalyticParams, variant: FormulaVariant) -> Result<f64, AnalyticsError> {
    tail_on_interval(p, p.v_cv_mps + p.v_nav_mps, variant, "P'''_VI")
}

/// The printed form is the two-or-more tail over the full range, even though
/// the accompanying text speaks of "at least one" vehicle. Kept as printed.
pub fn prob_at_least_one_in_range(p: &AnalyticParams) -> f64 {
    poisson_tail_two(p.range_m * p.lambda_per_m)
}

fn links(p: &AnalyticParams) -> f64 {
    success_prob_link(p.pe_vv, p.n_vv) * success_prob_link(p.pe_vi, p.n_vi)
}

pub fn p_same_dir_slower(p: &AnalyticParams, variant: FormulaVariant) -> Result<f64, AnalyticsError> {
    let delta_v = p.v_cv_mps - p.v_nav_mps;
    if delta_v >= 0.0 {
        return Err(AnalyticsError::WrongScenario {
            delta_v,
            expected: "V_CV - V_NAV < 0",
        });
    }
    Ok(prob_at_least_two_in_range(p, variant)? * links(p))
}

pub fn p_same_dir_faster(p: &AnalyticParams) -> Result<f64, AnalyticsError> {
    let delta_v = p.v_cv_mps - p.v_nav_mps;
    if delta_v <= 0.0 {
        return Err(AnalyticsError::WrongScenario {
            delta_v,
            expected: "V_CV - V_NAV > 0",
        });
    }
    Ok(prob_at_least_one_in_range(p) * links(p))
}

pub fn p_opposite(p: &AnalyticParams, variant: FormulaVariant) -> Result<f64, AnalyticsError> {
    Ok(prob_at_least_one_in_range(p) * prob_opposite_vi(p, variant)? * links(p))
}

/// Blend over direction and speed order. The same-direction branches use the
/// magnitude of `V_CV - V_NAV` with the sign each branch assumes.
///
/// `AsWritten` weights the opposite-direction branch by its V-I occupancy
/// factor alone; `Corrected` uses the full opposite-direction probability.
pub fn p_vehicle_assisted(p: &AnalyticParams, variant: FormulaVariant) -> Result<f64, AnalyticsError> {
    let opposite = match variant {
        FormulaVariant::AsWritten => prob_opposite_vi(p, variant)?,
        FormulaVariant::Corrected => p_opposite(p, variant)?,
    };
    let slower = prob_slower_vv(p, variant)? * links(p);
    let faster = prob_at_least_one_in_range(p) * links(p);
    Ok(p.p0 * opposite + (1.0 - p.p0) * (p.p1 * slower + (1.0 - p.p1) * faster))
}

pub fn p_cvfh(p: &AnalyticParams, variant: FormulaVariant) -> Result<f64, AnalyticsError> {
    Ok(p.p_ap * success_prob_link(p.pe_vi, p.n_vi) + (1.0 - p.p_ap) * p_vehicle_assisted(p, variant)?)
}
