use serde::Serialize;

use super::{select_carriers, CarrierAssignment, CloudTables, FogRouteError, SelectionPolicy};
use crate::sim::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PushReason {
    /// No other fog server holds the newest version.
    NoHolder,
    /// Holders exist but no device qualifies as a carrier.
    NoCarrier,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Plan {
    DirectCloudPush(PushReason),
    DtnViaCarriers(CarrierAssignment),
}

pub fn plan_dissemination(
    tables: &CloudTables,
    target_fog_id: &str,
    content_id: &str,
    now: SimTime,
    policy: &SelectionPolicy,
) -> Result<Plan, FogRouteError> {
    if !tables.fs.contains_key(target_fog_id) {
        return Err(FogRouteError::UnknownFogServer(target_fog_id.to_string()));
    }
    if tables.holders(content_id, target_fog_id).is_empty() {
        return Ok(Plan::DirectCloudPush(PushReason::NoHolder));
    }
    match select_carriers(tables, target_fog_id, content_id, now, policy) {
        Ok(a) => Ok(Plan::DtnViaCarriers(a)),
        Err(FogRouteError::NoEligibleCarriers | FogRouteError::EmptyAssignment) => {
            Ok(Plan::DirectCloudPush(PushReason::NoCarrier))
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fogroute::{Content, GlobalContentEntry};
    use crate::mobility::Point;

    fn setup() -> CloudTables {
        let mut t = CloudTables::new(3);
        t.add_fog_server("a", Point::new(0.0, 0.0));
        t.add_fog_server("b", Point::new(1000.0, 0.0));
        t.publish(Content {
            content_id: "c".into(),
            size_bytes: 1_000_000,
            affordable_delay_s: 3600.0,
            date_of_update: SimTime::from_secs(100.0),
            validation_time_s: 0.0,
        });
        t.upsert_gc(GlobalContentEntry {
            fog_server_id: "b".into(),
            content_id: "c".into(),
            date_of_update: SimTime::ZERO,
            validation_time_s: 0.0,
        })
        .unwrap();
        t
    }

    fn hold_at_a(t: &mut CloudTables) {
        t.upsert_gc(GlobalContentEntry {
            fog_server_id: "a".into(),
            content_id: "c".into(),
            date_of_update: SimTime::from_secs(100.0),
            validation_time_s: 0.0,
        })
        .unwrap();
    }

    fn visit(t: &mut CloudTables, dev: &str, fog: &str, x: f64, at: f64) {
        t.record_contact(
            dev,
            fog,
            SimTime::from_secs(at),
            SimTime::from_secs(at + 60.0),
            Point::new(x, 0.0),
        );
    }

    #[test]
    fn cloud_only_content_is_pushed() {
        let t = setup();
        let p = plan_dissemination(&t, "b", "c", SimTime::from_secs(200.0), &SelectionPolicy::default()).unwrap();
        assert_eq!(p, Plan::DirectCloudPush(PushReason::NoHolder));
    }

    #[test]
    fn holder_without_devices_is_pushed() {
        let mut t = setup();
        hold_at_a(&mut t);
        let p = plan_dissemination(&t, "b", "c", SimTime::from_secs(200.0), &SelectionPolicy::default()).unwrap();
        assert_eq!(p, Plan::DirectCloudPush(PushReason::NoCarrier));
    }

    #[test]
    fn holder_with_eligible_devices_goes_dtn() {
        let mut t = setup();
        hold_at_a(&mut t);
        for dev in ["d1", "d2"] {
            // Known at b, then moving east through z and a, toward b.
            visit(&mut t, dev, "b", 1000.0, 0.0);
            visit(&mut t, dev, "z", -1000.0, 200.0);
            visit(&mut t, dev, "a", 0.0, 400.0);
            t.device_positions
                .insert(dev.into(), (SimTime::from_secs(700.0), Point::new(10.0, 0.0)));
            t.fs.get_mut("a").unwrap().mobile_device_ids.insert(dev.into());
        }
        let p = plan_dissemination(&t, "b", "c", SimTime::from_secs(700.0), &SelectionPolicy::default()).unwrap();
        match p {
            Plan::DtnViaCarriers(a) => assert_eq!(a.len(), 2),
            other => panic!("expected DTN plan, got {other:?}"),
        }
    }
}
