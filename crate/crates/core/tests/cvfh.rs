use proptest::prelude::*;
use vfog_core::analytics::success_prob_link;
use vfog_core::cvfh::{
    handoff_80211, handoff_cvfh, process_reply, qualify_neighbor, run_highway, CvfhConfig, LinkParams, NeighborMessage,
    ReplyOutcome, ResponderKind, TapInfo, VehicleState,
};
use vfog_core::metrics::Scheme;
use vfog_core::mobility::Point;
use vfog_core::sim::{RngStream, SimTime};

fn tap(i: usize) -> TapInfo {
    TapInfo {
        ap_id: format!("ap-{i:03}"),
        ip: format!("10.0.0.{i}"),
        mac: format!("02:00:00:00:00:{i:02x}"),
    }
}

fn reply(request_id: u64, responder: usize, kind: ResponderKind) -> NeighborMessage {
    NeighborMessage::NeighborRep {
        request_id,
        responder_id: format!("v{responder}"),
        responder_kind: kind,
        tap_info: tap(responder),
    }
}

proptest! {
    #[test]
    fn at_most_one_reply_acted_on(
        replies in prop::collection::vec((0u64..3, 0usize..20, any::<bool>()), 0..30),
    ) {
        let mut cv = VehicleState::new("cv", Point::new(0.0, 0.0), 20.0, Point::new(1.0, 0.0));
        cv.outstanding_request = Some(1);
        let mut accepted = Vec::new();
        for (req, who, by_vehicle) in replies {
            let kind = if by_vehicle { ResponderKind::Vehicle } else { ResponderKind::Ap };
            if process_reply(&mut cv, &reply(req, who, kind)).unwrap() == ReplyOutcome::Accepted {
                accepted.push((req, who, by_vehicle));
            }
        }
        prop_assert!(accepted.len() <= 1);
        if let Some(&(req, who, by_vehicle)) = accepted.first() {
            prop_assert_eq!(req, 1);
            prop_assert_eq!(cv.tap.clone(), Some(tap(who)));
            prop_assert_eq!(cv.nav_id.is_some(), by_vehicle);
        } else {
            prop_assert!(cv.tap.is_none());
        }
    }

    #[test]
    fn qualification_ignores_translation(
        cv in (-1e4..1e4f64, -1e4..1e4f64),
        nv in (-1e3..1e3f64, -1e3..1e3f64),
        heading in 0.0..std::f64::consts::TAU,
        nv_heading in 0.0..std::f64::consts::TAU,
        shift in (-1e5..1e5f64, -1e5..1e5f64),
        same_sap in any::<bool>(),
    ) {
        let unit = |a: f64| Point::new(a.cos(), a.sin());
        let build = |dx: f64, dy: f64| {
            let cv_pos = Point::new(cv.0 + dx, cv.1 + dy);
            let mut n = VehicleState::new("nv", Point::new(cv_pos.x + nv.0, cv_pos.y + nv.1), 20.0, unit(nv_heading));
            n.sap_id = Some(if same_sap { "ap-000".into() } else { "ap-001".into() });
            let req = NeighborMessage::NeighborReq {
                request_id: 4,
                cv_id: "cv".into(),
                cv_sap_id: Some("ap-000".into()),
                cv_position: cv_pos,
                cv_heading: unit(heading),
            };
            qualify_neighbor(&n, &req)
        };
        prop_assert_eq!(build(0.0, 0.0), build(shift.0, shift.1));
    }
}

#[test]
fn scheme_latency_decomposition() {
    let params = LinkParams {
        pe_vv: 0.2,
        pe_vi: 0.2,
        retry_budget: 1,
        ..LinkParams::default()
    };
    let mut rng = RngStream::new(2, "decomp");
    for i in 0..2000 {
        let start = SimTime::from_secs(i as f64);
        let via = if i % 2 == 0 {
            ResponderKind::Vehicle
        } else {
            ResponderKind::Ap
        };
        let c = handoff_cvfh("cv", start, via, &params, &mut rng);
        assert_eq!(c.latency.auth_s + c.latency.assoc_s, 0.0);
        if c.success {
            assert!(c.completion_time >= c.trigger_time);
        }
        let b = handoff_80211("cv", start, &params, &mut rng);
        if b.success {
            assert_eq!(b.latency.auth_s, params.t_auth_s);
            assert_eq!(b.latency.assoc_s, params.t_asso_s);
            assert!(b.completion_time >= b.trigger_time);
        }
    }
}

fn success_rate(params: &LinkParams, trials: usize, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed, "baseline-success");
    let ok = (0..trials)
        .filter(|_| handoff_80211("cv", SimTime::ZERO, params, &mut rng).success)
        .count();
    ok as f64 / trials as f64
}

#[test]
fn baseline_success_matches_closed_form() {
    let trials = 200_000;
    for (pe, n) in [(0.1, 2), (0.05, 8), (0.3, 3)] {
        let params = LinkParams {
            pe_vi: pe,
            n_80211: n,
            retry_budget: 0,
            ..LinkParams::default()
        };
        let p = success_prob_link(pe, n);
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        let got = success_rate(&params, trials, 17);
        assert!((got - p).abs() <= 3.0 * se, "pe={pe} n={n}: {got} vs {p}");

        // With retries a packet is lost only when every attempt fails.
        let retried = LinkParams {
            retry_budget: 2,
            ..params
        };
        let p = success_prob_link(pe.powi(3), n);
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        let got = success_rate(&retried, trials, 18);
        assert!(
            (got - p).abs() <= 3.0 * se.max(1.0 / trials as f64),
            "retried pe={pe} n={n}: {got} vs {p}"
        );
    }
}

#[test]
fn highway_run_respects_reply_and_latency_rules() {
    let config = CvfhConfig {
        duration_s: 120.0,
        cv_count: 4,
        ..CvfhConfig::default()
    };
    let cvfh = run_highway(&config, Scheme::Cvfh, 8).unwrap();
    let base = run_highway(&config, Scheme::Ieee80211, 8).unwrap();
    assert!(!cvfh.handoffs.is_empty() && !base.handoffs.is_empty());
    assert!(cvfh.neighbor.accepted <= cvfh.neighbor.requests);
    for h in &cvfh.handoffs {
        assert_eq!(h.scheme, Scheme::Cvfh);
        assert_eq!(h.latency.auth_s + h.latency.assoc_s, 0.0);
    }
    for h in base.handoffs.iter().filter(|h| h.success) {
        assert_eq!(h.latency.auth_s, config.link.t_auth_s);
        assert_eq!(h.latency.assoc_s, config.link.t_asso_s);
    }
    assert!(cvfh.packets_delivered <= cvfh.packets_sent);

    let again = run_highway(&config, Scheme::Cvfh, 8).unwrap();
    assert_eq!(cvfh, again);
}
