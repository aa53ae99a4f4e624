use proptest::prelude::*;
use vfog_core::analytics::poisson_pmf;
use vfog_core::mobility::{
    contacts_with, sample_highway, DeviceKind, DeviceTrack, HighwayFlowParams, Point, Sample, Station, StationKind,
};
use vfog_core::sim::RngStream;

fn track(points: &[(f64, f64)], dt: f64) -> DeviceTrack {
    let samples = points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Sample {
            t: i as f64 * dt,
            pos: Point::new(x, y),
        })
        .collect();
    DeviceTrack::new("d", DeviceKind::NonScheduled, samples).unwrap()
}

fn station(range_m: f64) -> Station {
    Station {
        station_id: "s".into(),
        kind: StationKind::Fog,
        position: Point::new(0.0, 0.0),
        range_m,
    }
}

fn walk() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-400.0..400.0f64, -400.0..400.0f64), 2..25)
}

proptest! {
    #[test]
    fn contacts_sorted_disjoint_and_cover_the_in_range_set(points in walk(), range in 50.0..300.0f64) {
        let tr = track(&points, 10.0);
        let st = station(range);
        let spans = contacts_with(&tr, &st, range);
        for c in &spans {
            prop_assert!(c.end > c.start);
        }
        for w in spans.windows(2) {
            prop_assert!(w[0].end < w[1].start, "intervals must be disjoint and ordered");
        }

        let near_endpoint = |t: f64| spans.iter().any(|c| (t - c.start.secs()).abs() < 1e-3 || (t - c.end.secs()).abs() < 1e-3);
        let steps = 2000;
        for i in 0..=steps {
            let t = tr.end() * i as f64 / steps as f64;
            if near_endpoint(t) {
                continue;
            }
            let d = tr.position_at(t).unwrap().distance(st.position);
            let inside = spans.iter().any(|c| c.start.secs() <= t && t <= c.end.secs());
            if inside {
                prop_assert!(d <= range + 1e-6, "t={t} d={d} inside a contact but out of range");
            } else {
                prop_assert!(d >= range - 1e-3, "t={t} d={d} in range but not covered");
            }
        }
    }

    #[test]
    fn position_is_exact_at_samples_and_affine_between(points in walk(), frac in 0.0..1.0f64) {
        let tr = track(&points, 7.0);
        for s in tr.samples() {
            prop_assert_eq!(tr.position_at(s.t).unwrap(), s.pos);
        }
        for w in tr.samples().windows(2) {
            let t = w[0].t + frac * (w[1].t - w[0].t);
            let p = tr.position_at(t).unwrap();
            let want = Point::new(
                w[0].pos.x + frac * (w[1].pos.x - w[0].pos.x),
                w[0].pos.y + frac * (w[1].pos.y - w[0].pos.y),
            );
            prop_assert!(p.distance(want) < 1e-9);
        }
    }
}

#[test]
fn highway_counts_follow_poisson() {
    let params = HighwayFlowParams {
        lambda_per_m: 0.01,
        speed_min_mps: 10.0,
        speed_max_mps: 25.0,
        opposite_prob: 0.3,
        road_length_m: 300.0,
    };
    let mu = params.lambda_per_m * params.road_length_m;
    let draws = 100_000usize;
    let mut rng = RngStream::new(11, "highway-counts");
    let mut hist = vec![0usize; 32];
    for _ in 0..draws {
        let n = sample_highway(&params, &mut rng).unwrap().len();
        hist[n.min(31)] += 1;
    }
    for (k, &count) in hist.iter().enumerate().take(10) {
        let p = poisson_pmf(k as u64, mu);
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        let freq = count as f64 / draws as f64;
        assert!(
            (freq - p).abs() <= 3.0 * se,
            "k={k}: empirical {freq} vs pmf {p} (se {se})"
        );
    }
}

#[test]
fn highway_vehicles_sorted_and_in_bounds() {
    let params = HighwayFlowParams {
        lambda_per_m: 0.02,
        speed_min_mps: 10.0,
        speed_max_mps: 25.0,
        opposite_prob: 0.5,
        road_length_m: 2000.0,
    };
    let v = sample_highway(&params, &mut RngStream::new(3, "hw")).unwrap();
    assert!(v.windows(2).all(|w| w[0].position_m <= w[1].position_m));
    assert!(v.iter().all(|x| (0.0..=2000.0).contains(&x.position_m)));
    assert!(v.iter().all(|x| (10.0..=25.0).contains(&x.speed_mps)));
}
