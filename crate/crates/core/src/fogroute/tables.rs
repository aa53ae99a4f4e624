use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Content, FogRouteError};
use crate::mobility::{DeviceKind, Point, VisitHistory, VisitRecord};
use crate::sim::SimTime;

/// GC row: the version of one content held by one fog server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalContentEntry {
    pub fog_server_id: String,
    pub content_id: String,
    pub date_of_update: SimTime,
    pub validation_time_s: f64,
}

impl GlobalContentEntry {
    pub fn lapsed(&self, now: SimTime) -> bool {
        now.secs() >= self.date_of_update.secs() + self.validation_time_s
    }
}

/// FS row: what a fog server holds and which devices it last reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FogServerEntry {
    pub fog_server_id: String,
    pub position: Point,
    pub content_ids: BTreeSet<String>,
    pub mobile_device_ids: BTreeSet<String>,
}

/// MDMP row for one (device, fog server) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdmpEntry {
    pub mobile_device_id: String,
    pub fog_server_id: String,
    /// Total connected time, seconds.
    pub linked_time_s: f64,
    /// Completed contacts; the contact frequency used for ranking.
    pub contact_count: u32,
    /// Carried for completeness; no algorithm reads it.
    pub social_attribute: Option<String>,
}

impl MdmpEntry {
    pub fn mean_connection_s(&self) -> f64 {
        if self.contact_count == 0 {
            0.0
        } else {
            self.linked_time_s / f64::from(self.contact_count)
        }
    }
}

/// The cloud provider's view of the system. Movement patterns live in `visits`.
#[derive(Debug, Clone)]
pub struct CloudTables {
    /// Latest version of each content, as published by the cloud.
    pub catalog: BTreeMap<String, Content>,
    gc: BTreeMap<(String, String), GlobalContentEntry>,
    /// Newest GC date per content, kept in step with `gc`.
    newest_in_gc: BTreeMap<String, SimTime>,
    pub fs: BTreeMap<String, FogServerEntry>,
    pub mdmp: BTreeMap<(String, String), MdmpEntry>,
    pub visits: VisitHistory,
    pub device_kinds: BTreeMap<String, DeviceKind>,
    /// Last reported position per device.
    pub device_positions: BTreeMap<String, (SimTime, Point)>,
}

impl CloudTables {
    pub fn new(visit_history_k: usize) -> Self {
        CloudTables {
            catalog: BTreeMap::new(),
            gc: BTreeMap::new(),
            newest_in_gc: BTreeMap::new(),
            fs: BTreeMap::new(),
            mdmp: BTreeMap::new(),
            visits: VisitHistory::new(visit_history_k),
            device_kinds: BTreeMap::new(),
            device_positions: BTreeMap::new(),
        }
    }

    pub fn add_fog_server(&mut self, fog_server_id: &str, position: Point) {
        self.fs.insert(
            fog_server_id.to_string(),
            FogServerEntry {
                fog_server_id: fog_server_id.to_string(),
                position,
                content_ids: BTreeSet::new(),
                mobile_device_ids: BTreeSet::new(),
            },
        );
    }

    pub fn publish(&mut self, content: Content) {
        self.catalog.insert(content.content_id.clone(), content);
    }

    /// Inserts or replaces a GC row and mirrors it into the FS table.
    pub fn upsert_gc(&mut self, entry: GlobalContentEntry) -> Result<(), FogRouteError> {
        let fs = self
            .fs
            .get_mut(&entry.fog_server_id)
            .ok_or_else(|| FogRouteError::UnknownFogServer(entry.fog_server_id.clone()))?;
        fs.content_ids.insert(entry.content_id.clone());
        let newest = self
            .newest_in_gc
            .entry(entry.content_id.clone())
            .or_insert(entry.date_of_update);
        *newest = (*newest).max(entry.date_of_update);
        self.gc
            .insert((entry.fog_server_id.clone(), entry.content_id.clone()), entry);
        Ok(())
    }

    /// Records that `fog_server_id` now holds the catalog version of
    /// `content_id`. GC and FS change together or not at all.
    pub fn apply_update(&mut self, fog_server_id: &str, content_id: &str, date: SimTime) -> Result<(), FogRouteError> {
        let content = self
            .catalog
            .get(content_id)
            .ok_or_else(|| FogRouteError::UnknownContent(content_id.to_string()))?;
        let validation_time_s = content.validation_time_s;
        self.upsert_gc(GlobalContentEntry {
            fog_server_id: fog_server_id.to_string(),
            content_id: content_id.to_string(),
            date_of_update: date,
            validation_time_s,
        })
    }

    /// Newest version ever recorded in GC or published in the catalog.
    pub fn newest_version(&self, content_id: &str) -> Option<SimTime> {
        let from_gc = self.newest_in_gc.get(content_id).copied();
        let from_catalog = self.catalog.get(content_id).map(|c| c.date_of_update);
        from_gc.max(from_catalog)
    }

    pub fn version_at(&self, fog_server_id: &str, content_id: &str) -> Option<SimTime> {
        self.gc
            .get(&(fog_server_id.to_string(), content_id.to_string()))
            .map(|e| e.date_of_update)
    }

    /// Fog servers other than `exclude` that hold the newest version.
    pub fn holders(&self, content_id: &str, exclude: &str) -> Vec<String> {
        let Some(newest) = self.newest_version(content_id) else {
            return Vec::new();
        };
        self.fs
            .keys()
            .filter(|f| f.as_str() != exclude && self.version_at(f, content_id) == Some(newest))
            .cloned()
            .collect()
    }

    /// Folds one completed contact into MDMP and the visit history.
    pub fn record_contact(
        &mut self,
        device_id: &str,
        fog_server_id: &str,
        start: SimTime,
        end: SimTime,
        position: Point,
    ) {
        let row = self
            .mdmp
            .entry((device_id.to_string(), fog_server_id.to_string()))
            .or_insert_with(|| MdmpEntry {
                mobile_device_id: device_id.to_string(),
                fog_server_id: fog_server_id.to_string(),
                linked_time_s: 0.0,
                contact_count: 0,
                social_attribute: None,
            });
        row.linked_time_s += (end - start).max(0.0);
        row.contact_count += 1;
        self.visits.record(VisitRecord {
            device_id: device_id.to_string(),
            fog_server_id: fog_server_id.to_string(),
            arrival: start,
            position,
        });
    }

    pub fn gc(&self) -> &BTreeMap<(String, String), GlobalContentEntry> {
        &self.gc
    }

    pub fn mdmp_row(&self, device_id: &str, fog_server_id: &str) -> Option<&MdmpEntry> {
        self.mdmp.get(&(device_id.to_string(), fog_server_id.to_string()))
    }

    /// Every GC fog id appears in FS, and FS content sets mirror GC.
    pub fn is_consistent(&self) -> bool {
        self.gc.values().all(|e| {
            self.fs
                .get(&e.fog_server_id)
                .is_some_and(|f| f.content_ids.contains(&e.content_id))
        })
    }
}

/// (target fog server, content) pairs whose copy is out of date and past its
/// validation window, or missing while another server holds the content.
/// Sorted by target, then content.
pub fn detect_stale(tables: &CloudTables, now: SimTime) -> Vec<(String, String)> {
    let newest: BTreeMap<&str, SimTime> = tables
        .newest_in_gc
        .keys()
        .filter_map(|c| tables.newest_version(c).map(|t| (c.as_str(), t)))
        .collect();
    let mut out = Vec::new();
    for fog in tables.fs.keys() {
        for (&content_id, &latest) in &newest {
            match tables.gc.get(&(fog.clone(), content_id.to_string())) {
                Some(e) if e.date_of_update < latest && e.lapsed(now) => {
                    out.push((fog.clone(), content_id.to_string()));
                }
                Some(_) => {}
                None => out.push((fog.clone(), content_id.to_string())),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tables_with(rows: &[(&str, &str, f64, f64)]) -> CloudTables {
        let mut t = CloudTables::new(3);
        for (fog, _, _, _) in rows {
            t.add_fog_server(fog, Point::new(0.0, 0.0));
        }
        for &(fog, content, date, validation) in rows {
            t.upsert_gc(GlobalContentEntry {
                fog_server_id: fog.into(),
                content_id: content.into(),
                date_of_update: SimTime::from_secs(date),
                validation_time_s: validation,
            })
            .unwrap();
        }
        t
    }

    #[test]
    fn identical_versions_are_not_stale() {
        let t = tables_with(&[("a", "c", 10.0, 0.0), ("b", "c", 10.0, 0.0)]);
        assert!(detect_stale(&t, SimTime::from_secs(1e6)).is_empty());
    }

    #[test]
    fn older_copy_is_reported() {
        let t = tables_with(&[("a", "c", 100.0, 0.0), ("b", "c", 50.0, 0.0)]);
        assert_eq!(
            detect_stale(&t, SimTime::from_secs(200.0)),
            vec![("b".into(), "c".into())]
        );
    }

    #[test]
    fn validation_window_defers_staleness() {
        let t = tables_with(&[("a", "c", 100.0, 0.0), ("b", "c", 50.0, 500.0)]);
        assert!(detect_stale(&t, SimTime::from_secs(549.0)).is_empty());
        assert_eq!(detect_stale(&t, SimTime::from_secs(550.0)).len(), 1);
    }

    #[test]
    fn missing_copy_is_reported() {
        let mut t = tables_with(&[("a", "c", 100.0, 0.0)]);
        t.add_fog_server("b", Point::new(1.0, 1.0));
        assert_eq!(detect_stale(&t, SimTime::ZERO), vec![("b".into(), "c".into())]);
    }

    #[test]
    fn update_is_mirrored_in_both_tables() {
        let mut t = tables_with(&[("a", "c", 100.0, 0.0), ("b", "c", 50.0, 0.0)]);
        t.publish(Content {
            content_id: "c".into(),
            size_bytes: 1,
            affordable_delay_s: 1.0,
            date_of_update: SimTime::from_secs(100.0),
            validation_time_s: 0.0,
        });
        assert_eq!(t.holders("c", "b"), vec!["a".to_string()]);
        t.apply_update("b", "c", SimTime::from_secs(100.0)).unwrap();
        assert!(detect_stale(&t, SimTime::from_secs(1e6)).is_empty());
        assert!(t.is_consistent());
        assert!(t.apply_update("zz", "c", SimTime::ZERO).is_err());
        assert!(t.apply_update("b", "nope", SimTime::ZERO).is_err());
        assert!(t.is_consistent());
    }

    #[test]
    fn mdmp_accumulates() {
        let mut t = CloudTables::new(3);
        t.record_contact(
            "d",
            "f",
            SimTime::from_secs(0.0),
            SimTime::from_secs(30.0),
            Point::new(0.0, 0.0),
        );
        t.record_contact(
            "d",
            "f",
            SimTime::from_secs(100.0),
            SimTime::from_secs(110.0),
            Point::new(0.0, 0.0),
        );
        let row = t.mdmp_row("d", "f").unwrap();
        assert_eq!(row.contact_count, 2);
        assert_eq!(row.mean_connection_s(), 20.0);
        assert_eq!(t.visits.visits("d", "f").count(), 2);
    }
}
