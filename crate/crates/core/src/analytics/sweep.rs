use std::collections::BTreeMap;
use std::io::Write;

use super::formulas as f;
use super::{AnalyticParams, AnalyticsError, FormulaVariant};

/// One grid point: the swept values and every model quantity. A quantity that
/// is undefined at this point (domain or variant error) is `None` and written
/// as an empty cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: AnalyticParams,
    pub grid: Vec<(String, f64)>,
    pub values: Vec<(String, Option<f64>)>,
}

impl SweepRow {
    pub fn get(&self, column: &str) -> Option<f64> {
        self.values.iter().find(|(c, _)| c == column).and_then(|(_, v)| *v)
    }
}

fn with_param(base: &AnalyticParams, name: &str, value: f64) -> Result<AnalyticParams, AnalyticsError> {
    let mut json = serde_json::to_value(base).expect("params serialize");
    let obj = json.as_object_mut().expect("params are an object");
    let slot = obj
        .get_mut(name)
        .ok_or_else(|| AnalyticsError::UnknownParam(name.to_string()))?;
    *slot = if slot.is_u64() && value >= 0.0 && value.fract() == 0.0 {
        serde_json::Value::from(value as u64)
    } else {
        serde_json::Value::from(value)
    };
    serde_json::from_value(json).map_err(|_| AnalyticsError::InvalidParams {
        name: "sweep value",
        value,
        reason: "does not fit the parameter type",
    })
}

fn evaluate(p: &AnalyticParams, variants: &[FormulaVariant]) -> Vec<(String, Option<f64>)> {
    let keep = |name: &str, r: Result<f64, AnalyticsError>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("{name}: {e}");
            None
        }
    };
    let links = f::success_prob_link(p.pe_vv, p.n_vv) * f::success_prob_link(p.pe_vi, p.n_vi);
    let mut out: Vec<(String, Option<f64>)> = vec![
        ("latency_80211_s".into(), Some(f::latency_80211(p))),
        ("prob_80211".into(), Some(f::prob_80211(p))),
        ("t_wl_s".into(), Some(f::t_wl(p))),
        ("t_ap_s".into(), Some(f::t_ap(p))),
        ("t_cvfh_s".into(), Some(f::t_cvfh(p))),
        ("ps_vv".into(), Some(f::success_prob_link(p.pe_vv, p.n_vv))),
        ("ps_vi".into(), Some(f::success_prob_link(p.pe_vi, p.n_vi))),
        ("p_vv_in_range".into(), Some(f::prob_at_least_one_in_range(p))),
        ("p_same_faster".into(), Some(f::prob_at_least_one_in_range(p) * links)),
    ];
    for &v in variants {
        let s = v.as_str();
        let cols: [(&str, Result<f64, AnalyticsError>); 6] = [
            ("p_vv_two_in_range", f::prob_slower_vv(p, v)),
            ("p_same_slower", f::prob_slower_vv(p, v).map(|x| x * links)),
            ("p_vi_opposite", f::prob_opposite_vi(p, v)),
            ("p_opposite", f::p_opposite(p, v)),
            ("p_vehicle_assisted", f::p_vehicle_assisted(p, v)),
            ("p_cvfh", f::p_cvfh(p, v)),
        ];
        for (name, r) in cols {
            let column = format!("{name}_{s}");
            let value = keep(&column, r);
            out.push((column, value));
        }
    }
    out
}

/// Cartesian product of `grid` over `base`, keys in sorted order with the last
/// key varying fastest.
pub fn sweep_rows(
    base: &AnalyticParams,
    grid: &BTreeMap<String, Vec<f64>>,
    variants: &[FormulaVariant],
) -> Result<Vec<SweepRow>, AnalyticsError> {
    base.validate()?;
    let mut points: Vec<(AnalyticParams, Vec<(String, f64)>)> = vec![(base.clone(), Vec::new())];
    for (name, values) in grid {
        let mut next = Vec::with_capacity(points.len() * values.len());
        for (params, assigned) in &points {
            for &value in values {
                let p = with_param(params, name, value)?;
                p.validate()?;
                let mut a = assigned.clone();
                a.push((name.clone(), value));
                next.push((p, a));
            }
        }
        points = next;
    }
    Ok(points
        .into_iter()
        .map(|(params, grid)| {
            let values = evaluate(&params, variants);
            SweepRow { params, grid, values }
        })
        .collect())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), AnalyticsError> {
    let csv_err = |e: csv::Error| AnalyticsError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = rows.first() {
        let header: Vec<&str> = first
            .grid
            .iter()
            .map(|(k, _)| k.as_str())
            .chain(first.values.iter().map(|(k, _)| k.as_str()))
            .collect();
        w.write_record(&header).map_err(csv_err)?;
    }
    for row in rows {
        let cells: Vec<String> = row
            .grid
            .iter()
            .map(|(_, v)| v.to_string())
            .chain(
                row.values
                    .iter()
                    .map(|(_, v)| v.map(|x| x.to_string()).unwrap_or_default()),
            )
            .collect();
        w.write_record(&cells).map_err(csv_err)?;
    }
    w.flush().map_err(|e| AnalyticsError::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_product_and_columns() {
        let mut grid = BTreeMap::new();
        grid.insert("n_vv".to_string(), vec![3.0, 8.0]);
        grid.insert("pe_vv".to_string(), vec![0.01, 0.1, 0.2]);
        let rows = sweep_rows(&AnalyticParams::default(), &grid, &FormulaVariant::ALL).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[1].params.n_vv, 3);
        assert_eq!(rows[1].params.pe_vv, 0.1);
        assert_eq!(rows[5].params.n_vv, 8);
        assert!(rows[0].get("p_cvfh_corrected").is_some());
        assert!(rows[0].get("p_cvfh_as_written").is_some());

        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n_vv,pe_vv,latency_80211_s,"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn unknown_and_invalid_keys() {
        let mut grid = BTreeMap::new();
        grid.insert("warp".to_string(), vec![1.0]);
        assert!(matches!(
            sweep_rows(&AnalyticParams::default(), &grid, &[FormulaVariant::Corrected]),
            Err(AnalyticsError::UnknownParam(_))
        ));
        let mut grid = BTreeMap::new();
        grid.insert("n_vv".to_string(), vec![2.5]);
        assert!(sweep_rows(&AnalyticParams::default(), &grid, &[FormulaVariant::Corrected]).is_err());
        let mut grid = BTreeMap::new();
        grid.insert("p0".to_string(), vec![1.5]);
        assert!(sweep_rows(&AnalyticParams::default(), &grid, &[FormulaVariant::Corrected]).is_err());
    }
}
