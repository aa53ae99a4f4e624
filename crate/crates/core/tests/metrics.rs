use std::collections::BTreeMap;

use proptest::prelude::*;
use vfog_core::metrics::{
    delivery_ratio, emit_report, handoff_delay_stats, handoff_table, read_table_csv, Channel, DeliveryRecord, GroupBy,
    HandoffSample, ReportFormat, Scheme,
};
use vfog_core::sim::SimTime;

fn record() -> impl Strategy<Value = DeliveryRecord> {
    (0.0..1000.0f64, prop::option::of(0.0..5000.0f64), any::<bool>()).prop_map(|(req, delay, cloud)| DeliveryRecord {
        content_id: "c".into(),
        target_fog_id: "f".into(),
        requested_at: SimTime::from_secs(req),
        delivered_at: delay.map(|d| SimTime::from_secs(req + d)),
        channel: if cloud { Channel::CloudDirect } else { Channel::Dtn },
    })
}

fn sample() -> impl Strategy<Value = HandoffSample> {
    (
        any::<bool>(),
        prop::sample::select(vec![11.0, 16.5, 22.0, 25.0]),
        prop::sample::select(vec![50.0, 100.0, 200.0]),
        0.0..0.5f64,
        prop::bool::weighted(0.8),
    )
        .prop_map(|(cvfh, speed_mps, packet_rate, delay_s, success)| HandoffSample {
            scheme: if cvfh { Scheme::Cvfh } else { Scheme::Ieee80211 },
            speed_mps,
            packet_rate,
            delay_s,
            success,
        })
}

proptest! {
    #[test]
    fn delivery_ratio_non_decreasing_in_delay(
        records in prop::collection::vec(record(), 1..60),
        mut delays in prop::collection::vec(0.0..6000.0f64, 2..8),
        cloud in any::<bool>(),
    ) {
        delays.sort_by(f64::total_cmp);
        let ratios: Vec<f64> = delays.iter().map(|&d| delivery_ratio(&records, d, cloud).unwrap()).collect();
        for w in ratios.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        prop_assert!(ratios.iter().all(|r| (0.0..=1.0).contains(r)));
        for &d in &delays {
            prop_assert!(delivery_ratio(&records, d, false).unwrap() <= delivery_ratio(&records, d, true).unwrap());
        }
    }

    #[test]
    fn every_sample_lands_in_exactly_one_group(samples in prop::collection::vec(sample(), 1..80), by_rate in any::<bool>()) {
        let group_by = if by_rate { GroupBy::PacketRate } else { GroupBy::Speed };
        let stats = handoff_delay_stats(&samples, group_by).unwrap();
        prop_assert_eq!(stats.iter().map(|s| s.count).sum::<usize>(), samples.len());
        for s in &samples {
            let key = if by_rate { s.packet_rate } else { s.speed_mps };
            let hits = stats.iter().filter(|g| g.key == key && g.scheme == s.scheme).count();
            prop_assert_eq!(hits, 1);
        }
    }

    #[test]
    fn csv_round_trip_reproduces_stats(samples in prop::collection::vec(sample(), 1..80)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("handoff.csv");
        emit_report(&handoff_table(&samples), ReportFormat::Csv, &path).unwrap();
        let (header, rows) = read_table_csv(&path).unwrap();
        prop_assert_eq!(header, vec!["scheme", "speed_mps", "packet_rate", "delay_s", "success"]);

        // Recompute per (speed, scheme) means from the file alone.
        let mut acc: BTreeMap<(String, String), (f64, usize, usize)> = BTreeMap::new();
        for r in &rows {
            let e = acc.entry((r[1].clone(), r[0].clone())).or_default();
            e.2 += 1;
            if r[4] == "true" {
                e.0 += r[3].parse::<f64>().unwrap();
                e.1 += 1;
            }
        }
        let stats = handoff_delay_stats(&samples, GroupBy::Speed).unwrap();
        prop_assert_eq!(stats.len(), acc.len());
        for s in stats {
            let (sum, ok, n) = acc[&(s.key.to_string(), s.scheme.as_str().to_string())];
            prop_assert_eq!(n, s.count);
            prop_assert_eq!(ok, s.successes);
            match s.mean_delay_s {
                Some(m) => prop_assert!((m - sum / ok as f64).abs() <= 1e-12 * m.abs().max(1.0)),
                None => prop_assert_eq!(ok, 0),
            }
        }
    }

    #[test]
    fn emission_is_deterministic_and_formats_agree(samples in prop::collection::vec(sample(), 0..40)) {
        let dir = tempfile::tempdir().unwrap();
        let table = handoff_table(&samples);
        for format in [ReportFormat::Csv, ReportFormat::Json] {
            let a = dir.path().join(format!("a.{}", format.extension()));
            let b = dir.path().join(format!("b.{}", format.extension()));
            emit_report(&table, format, &a).unwrap();
            emit_report(&handoff_table(&samples), format, &b).unwrap();
            prop_assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        }
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
        let (header, rows) = read_table_csv(&dir.path().join("a.csv")).unwrap();
        prop_assert_eq!(&json["columns"], &serde_json::json!(header));
        let json_rows = json["rows"].as_array().unwrap();
        prop_assert_eq!(json_rows.len(), rows.len());
        for (j, c) in json_rows.iter().zip(&rows) {
            prop_assert_eq!(j[0].as_str().unwrap(), c[0].as_str());
            for k in 1..4 {
                prop_assert_eq!(j[k].as_f64().unwrap(), c[k].parse::<f64>().unwrap());
            }
            prop_assert_eq!(j[4].as_bool().unwrap().to_string(), c[4].clone());
        }
    }
}
