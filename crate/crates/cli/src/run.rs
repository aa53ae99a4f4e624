use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use vfog_core::analytics::{monte_carlo, sweep_rows, McQuantity};
use vfog_core::cvfh::{run_highway, CvfhConfig, HighwayOutcome, NeighborStats};
use vfog_core::fogroute::{run_fogroute, FogRouteScenario, MessageCounters};
use vfog_core::metrics::{
    convergence_table, convergence_times, delivery_ratio, delivery_table, emit_report, handoff_delay_stats,
    handoff_table, throughput, throughput_table, Cell, GroupBy, ReportFormat, Scheme, Table, ThroughputRow,
};
use vfog_core::mobility::{generate_fog_grid, generate_synthetic_trace, load_stations, load_trace};
use vfog_core::sim::RngStream;

use crate::config::{AnalyticBlock, FogRouteBlock, Mode, ScenarioConfig};
use crate::CliError;

pub const RESOLVED_CONFIG: &str = "resolved_config.json";

/// Files written by one run and the handful of numbers a sweep summary keeps.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub headline: Vec<(String, Option<f64>)>,
}

struct Writer {
    dir: PathBuf,
    format: ReportFormat,
    files: Vec<PathBuf>,
}

impl Writer {
    fn table(&mut self, table: &Table) -> Result<(), CliError> {
        let path = self.dir.join(format!("{}.{}", table.name, self.format.extension()));
        emit_report(table, self.format, &path)?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Invalid(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }
}

/// Runs a resolved config and writes its reports plus the config echo to `out`.
pub fn execute(config: &ScenarioConfig, out: &Path) -> Result<RunOutput, CliError> {
    fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let mut echo = config.clone();
    echo.output_dir = Some(out.to_path_buf());
    let mut w = Writer {
        dir: out.to_path_buf(),
        format: config.report_format,
        files: Vec::new(),
    };
    w.json(RESOLVED_CONFIG, &echo)?;
    let seed = config.seed.expect("resolved configs carry a seed");
    let headline = match config.mode {
        Mode::Analytic => analytic(config.analytic.as_ref().expect("resolved"), seed, &mut w)?,
        Mode::SimFogroute => fogroute(config.fogroute.as_ref().expect("resolved"), seed, &mut w)?,
        Mode::SimCvfh => cvfh(config.cvfh.as_ref().expect("resolved"), seed, &mut w)?,
    };
    Ok(RunOutput {
        dir: out.to_path_buf(),
        files: w.files,
        headline,
    })
}

fn analytic(block: &AnalyticBlock, seed: u64, w: &mut Writer) -> Result<Vec<(String, Option<f64>)>, CliError> {
    let rows = sweep_rows(&block.params, &block.grid, &block.variants)?;
    let first = rows.first().expect("a sweep has at least the base point");
    let columns: Vec<&str> = first
        .grid
        .iter()
        .map(|(k, _)| k.as_str())
        .chain(first.values.iter().map(|(k, _)| k.as_str()))
        .collect();
    let mut table = Table::new("analytic", &columns);
    for row in &rows {
        table.push(
            row.grid
                .iter()
                .map(|(_, v)| Cell::Num(*v))
                .chain(row.values.iter().map(|(_, v)| Cell::from(*v)))
                .collect(),
        );
    }
    w.table(&table)?;

    if block.monte_carlo_trials > 0 {
        let mut mc = Table::new(
            "monte_carlo",
            &["point", "quantity", "closed_form", "estimate", "std_error", "z"],
        );
        let root = RngStream::new(seed, "monte_carlo");
        for (i, row) in rows.iter().enumerate() {
            for q in McQuantity::ALL {
                let Ok(exact) = q.closed_form(&row.params) else {
                    continue;
                };
                let est = monte_carlo(
                    &row.params,
                    q,
                    block.monte_carlo_trials,
                    &root.substream(format!("point{i}")),
                )?;
                let se = est.std_error_at(exact);
                let z = if se > 0.0 { (est.probability - exact) / se } else { 0.0 };
                mc.push(vec![
                    Cell::Int(i as u64),
                    Cell::Str(q.name().into()),
                    Cell::Num(exact),
                    Cell::Num(est.probability),
                    Cell::Num(se),
                    Cell::Num(z),
                ]);
            }
        }
        w.table(&mc)?;
    }
    Ok(first.values.clone())
}

#[derive(Serialize)]
struct FogRouteSummary {
    counters: MessageCounters,
    carrier_deliveries: u64,
    stale_pairs: usize,
    servers: usize,
    unconverged_servers: usize,
    affordable_delay_s: f64,
    delivery_ratio_dtn: f64,
    delivery_ratio_all: f64,
    events_processed: u64,
}

fn fogroute(block: &FogRouteBlock, seed: u64, w: &mut Writer) -> Result<Vec<(String, Option<f64>)>, CliError> {
    let cfg = &block.scenario;
    let root = RngStream::new(seed, "fogroute");
    let stations = match &block.stations_file {
        Some(p) => load_stations(p)?,
        None => generate_fog_grid(
            cfg.fog_servers,
            cfg.trace.width_m,
            cfg.trace.height_m,
            cfg.fog_range_m,
            &mut root.substream("stations"),
        ),
    };
    let traces = match &block.trace_file {
        Some(p) => {
            let loaded = load_trace(p)?;
            for r in &loaded.report.rejected {
                log::warn!("trace device {} rejected: {}", r.device_id, r.reason);
            }
            loaded.traces
        }
        None => generate_synthetic_trace(&cfg.trace, &stations, &mut root.substream("trace"))?,
    };
    let scenario = FogRouteScenario::new(stations, traces);
    let out = run_fogroute(cfg, &scenario, seed)?;

    w.table(&delivery_table(&out.deliveries))?;
    w.table(&convergence_table(&out.convergence))?;
    let mut ratios = Table::new("delivery_ratio", &["expected_delay_s", "ratio_dtn", "ratio_all"]);
    let mut delays = block.expected_delays_s.clone();
    delays.push(cfg.affordable_delay_s);
    delays.sort_by(f64::total_cmp);
    delays.dedup();
    let ratio = |d: f64, cloud: bool| {
        if out.deliveries.is_empty() {
            Ok(None)
        } else {
            delivery_ratio(&out.deliveries, d, cloud).map(Some)
        }
    };
    for d in delays {
        ratios.push(vec![Cell::Num(d), ratio(d, false)?.into(), ratio(d, true)?.into()]);
    }
    w.table(&ratios)?;

    let unconverged = convergence_times(&out.convergence).unconverged_count();
    let dtn = ratio(cfg.affordable_delay_s, false)?.unwrap_or(1.0);
    let all = ratio(cfg.affordable_delay_s, true)?.unwrap_or(1.0);
    let summary = FogRouteSummary {
        counters: out.counters,
        carrier_deliveries: out.carrier_deliveries,
        stale_pairs: out.deliveries.len(),
        servers: out.convergence.len(),
        unconverged_servers: unconverged,
        affordable_delay_s: cfg.affordable_delay_s,
        delivery_ratio_dtn: dtn,
        delivery_ratio_all: all,
        events_processed: out.events_processed,
    };
    w.json("summary.json", &summary)?;
    let c = out.counters;
    Ok(vec![
        ("delivery_ratio_dtn".into(), Some(dtn)),
        ("delivery_ratio_all".into(), Some(all)),
        ("unconverged_servers".into(), Some(unconverged as f64)),
        ("requests".into(), Some(c.requests as f64)),
        ("accepts".into(), Some(c.accepts as f64)),
        ("declines".into(), Some(c.declines as f64)),
        ("acks".into(), Some(c.acks as f64)),
        ("direct_pushes".into(), Some(c.direct_pushes as f64)),
    ])
}

#[derive(Serialize)]
struct SchemeSummary {
    scheme: Scheme,
    handoffs: usize,
    mean_delay_s: Option<f64>,
    failure_rate: Option<f64>,
    aggregate_throughput_bps: f64,
    packets_sent: u64,
    packets_delivered: u64,
    neighbor: NeighborStats,
}

fn cvfh(cfg: &CvfhConfig, seed: u64, w: &mut Writer) -> Result<Vec<(String, Option<f64>)>, CliError> {
    let outcomes: Vec<HighwayOutcome> = [Scheme::Cvfh, Scheme::Ieee80211]
        .iter()
        .map(|&s| run_highway(cfg, s, seed))
        .collect::<Result<_, _>>()?;
    let samples: Vec<_> = outcomes.iter().flat_map(|o| o.handoff_samples(cfg)).collect();
    w.table(&handoff_table(&samples))?;

    let mut stats = Table::new(
        "handoff_stats",
        &[
            "scheme",
            "count",
            "successes",
            "mean_delay_s",
            "std_delay_s",
            "failure_rate",
        ],
    );
    let grouped = if samples.is_empty() {
        Vec::new()
    } else {
        handoff_delay_stats(&samples, GroupBy::Speed)?
    };
    for s in &grouped {
        stats.push(vec![
            Cell::Str(s.scheme.as_str().into()),
            Cell::Int(s.count as u64),
            Cell::Int(s.successes as u64),
            s.mean_delay_s.into(),
            s.std_delay_s.into(),
            Cell::Num(s.failure_rate),
        ]);
    }
    w.table(&stats)?;

    let mut headline = Vec::new();
    let mut summaries = Vec::new();
    for o in &outcomes {
        let tp = throughput(&o.throughput, cfg.duration_s)?;
        let rows: Vec<ThroughputRow> = tp
            .per_vehicle
            .iter()
            .map(|(id, bps)| ThroughputRow {
                vehicle_id: id.clone(),
                speed_mps: cfg.cv_speed_mps,
                packet_rate: cfg.packet_rate_pps,
                bits_per_s: *bps,
            })
            .collect();
        let mut table = throughput_table(&rows);
        table.name = format!("throughput_{}", o.scheme.as_str());
        w.table(&table)?;
        let st = grouped.iter().find(|s| s.scheme == o.scheme);
        let name = o.scheme.as_str();
        headline.push((format!("mean_delay_{name}_s"), st.and_then(|s| s.mean_delay_s)));
        headline.push((format!("failure_rate_{name}"), st.map(|s| s.failure_rate)));
        headline.push((format!("throughput_{name}_bps"), Some(tp.aggregate)));
        summaries.push(SchemeSummary {
            scheme: o.scheme,
            handoffs: o.handoffs.len(),
            mean_delay_s: st.and_then(|s| s.mean_delay_s),
            failure_rate: st.map(|s| s.failure_rate),
            aggregate_throughput_bps: tp.aggregate,
            packets_sent: o.packets_sent,
            packets_delivered: o.packets_delivered,
            neighbor: o.neighbor,
        });
    }
    w.json("summary.json", &summaries)?;
    Ok(headline)
}
