// SPDX-License-Identifier: Apache-2.0

//! The five subcommands. Each returns the text it wants printed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use o3net::alarm::{HistoryRow, MonitorConfig};
use o3net::metrics::{idw_grid, BoundingBox, SitePoint};
use o3net::proxy::{evaluate_proxy, ProxyScore, Role, Strategy};
use o3net::simulator::{presets, run_scenario, Scenario, GENERATOR_NAME};
use o3net::{Hour, TimeSeries};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{NetworkConfig, ProxySettings, ThresholdOverrides};
use crate::error::{CliError, CliResult};
use crate::pipeline::{resolve_proxy, run_low_cost, SiteRun};
use crate::series_csv::{create_dir, opt, read_series, scan_files, write_series, write_text};
use crate::svg;

fn pct(f: f64) -> String {
    format!("{:.1}", 100.0 * f)
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::write(path, e))
}

fn write_row<I, T>(w: &mut csv::Writer<std::fs::File>, path: &Path, row: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| CliError::write(path, e))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| CliError::write(path, e))
}

fn monitor_config(cfg: &NetworkConfig, overrides: &ThresholdOverrides) -> CliResult<MonitorConfig> {
    let mut m = cfg.monitor.clone();
    overrides.apply(&mut m.thresholds);
    m.validate()?;
    Ok(m)
}

// ---------------------------------------------------------------- validate

/// Checks series files (from `config`, plus any in `extra`) and reports
/// per-site coverage.
pub fn validate(config: Option<&Path>, extra: &[PathBuf]) -> CliResult<String> {
    let cfg = config.map(NetworkConfig::load).transpose()?;
    let mut paths = cfg.as_ref().map(NetworkConfig::series_paths).unwrap_or_default();
    paths.extend_from_slice(extra);
    if paths.is_empty() {
        return Err(CliError::input("no series files given"));
    }
    let scan = scan_files(&paths);
    let mut out = String::new();
    for w in &scan.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    if let Some(cfg) = &cfg {
        for id in scan.series.keys().filter(|id| cfg.site(id).is_none()) {
            let _ = writeln!(out, "warning: site {id} has data but is not in the config");
        }
        for s in cfg.sites.iter().filter(|s| !scan.series.contains_key(&s.id)) {
            let _ = writeln!(out, "warning: site {} has no data", s.id);
        }
    }
    let series = scan.into_result()?;
    let _ =
        writeln!(out, "{:<16} {:<10} {:>7} {:<21} {:<21} {:>9}", "site", "role", "hours", "first", "last", "coverage");
    for (id, s) in &series {
        let role = cfg.as_ref().and_then(|c| c.site(id)).map_or("?", |r| match r.role {
            Role::Reference => "reference",
            Role::LowCost => "low-cost",
        });
        let (first, last, cov) = match s.span() {
            Some(r) => (r.start.to_string(), r.end.to_string(), s.len() as f64 / r.len() as f64),
            None => (String::new(), String::new(), 0.0),
        };
        let _ = writeln!(out, "{id:<16} {role:<10} {:>7} {first:<21} {last:<21} {:>8}%", s.len(), pct(cov));
    }
    Ok(out)
}

// --------------------------------------------------------------------- run

pub const CHART_HEADER: [&str; 15] = [
    "timestamp",
    "p_ks",
    "a0_raw",
    "a1_raw",
    "a0_trend",
    "a1_trend",
    "breach_ks",
    "breach_a0",
    "breach_a1",
    "alarm_ks",
    "alarm_a0",
    "alarm_a1",
    "corrected_flag",
    "raw_value",
    "output_value",
];

fn flag(b: Option<bool>) -> String {
    b.map(|b| u8::from(b).to_string()).unwrap_or_default()
}

fn chart_row(r: &HistoryRow) -> Vec<String> {
    vec![
        r.hour.to_string(),
        opt(r.p_ks),
        opt(r.raw.map(|e| e.0)),
        opt(r.raw.map(|e| e.1)),
        opt(r.trend.map(|e| e.0)),
        opt(r.trend.map(|e| e.1)),
        flag(r.breaches.ks),
        flag(r.breaches.a0),
        flag(r.breaches.a1),
        flag(Some(r.alarms[0])),
        flag(Some(r.alarms[1])),
        flag(Some(r.alarms[2])),
        flag(Some(r.corrected)),
        opt(r.raw_value),
        opt(r.output_value),
    ]
}

fn write_site_outputs(dir: &Path, run: &SiteRun) -> CliResult<()> {
    let Ok(m) = &run.outcome else { return Ok(()) };
    let corrected = dir.join("corrected").join(format!("{}.csv", run.site_id));
    let mut w = csv_writer(&corrected)?;
    write_row(&mut w, &corrected, ["timestamp", "raw", "output", "corrected_flag"])?;
    for r in m.ledger.history() {
        if let (Some(raw), Some(out)) = (r.raw_value, r.output_value) {
            write_row(
                &mut w,
                &corrected,
                [r.hour.to_string(), raw.to_string(), out.to_string(), flag(Some(r.corrected))],
            )?;
        }
    }
    finish(w, &corrected)?;
    let chart = dir.join("charts").join(format!("{}.csv", run.site_id));
    let mut w = csv_writer(&chart)?;
    write_row(&mut w, &chart, CHART_HEADER)?;
    for r in m.ledger.history() {
        write_row(&mut w, &chart, chart_row(r))?;
    }
    finish(w, &chart)
}

/// Runs the framework over every low-cost site and writes corrected series,
/// control charts and `summary.csv` under `out_dir`.
pub fn run(config: &Path, overrides: &ThresholdOverrides, out_dir: Option<&Path>) -> CliResult<String> {
    let cfg = NetworkConfig::load(config)?;
    let monitor = monitor_config(&cfg, overrides)?;
    let series = read_series(&cfg.series_paths())?;
    let dir = cfg.output_dir(out_dir);
    create_dir(&dir.join("corrected"))?;
    create_dir(&dir.join("charts"))?;
    let runs = run_low_cost(&cfg, &series, &monitor, None);
    if runs.is_empty() {
        return Err(CliError::input("no low-cost site in the config has data"));
    }
    runs.par_iter().map(|r| write_site_outputs(&dir, r)).collect::<CliResult<Vec<()>>>()?;

    let summary_path = dir.join("summary.csv");
    let mut w = csv_writer(&summary_path)?;
    write_row(
        &mut w,
        &summary_path,
        [
            "site_id",
            "strategy",
            "proxy",
            "total_hours",
            "monitored_hours",
            "alarm_ks_pct",
            "alarm_a0_pct",
            "alarm_a1_pct",
            "corrected_pct",
            "status",
        ],
    )?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:<15} {:<15} {:>8} {:>8} {:>8} {:>8} {:>11}  status",
        "site", "strategy", "proxy", "hours", "KS %", "a0 %", "a1 %", "corrected %"
    );
    let mut failures = 0;
    for r in &runs {
        let strategy = r.assignment.as_ref().map_or("", |a| a.strategy.as_str());
        let proxy = r.proxy_label();
        match &r.outcome {
            Ok(m) => {
                let s = m.ledger.summary();
                let [ks, a0, a1] = s.alarm_fraction.map(pct);
                let corr = pct(s.corrected_fraction);
                write_row(
                    &mut w,
                    &summary_path,
                    [
                        r.site_id.as_str(),
                        strategy,
                        &proxy,
                        &s.total_hours.to_string(),
                        &s.monitored_hours.to_string(),
                        &ks,
                        &a0,
                        &a1,
                        &corr,
                        "ok",
                    ],
                )?;
                let _ = writeln!(
                    out,
                    "{:<12} {strategy:<15} {proxy:<15} {:>8} {ks:>8} {a0:>8} {a1:>8} {corr:>11}  ok",
                    r.site_id, s.total_hours
                );
            }
            Err(reason) => {
                failures += 1;
                let status = format!("failed: {reason}");
                write_row(
                    &mut w,
                    &summary_path,
                    [r.site_id.as_str(), strategy, &proxy, "", "", "", "", "", "", &status],
                )?;
                let _ = writeln!(
                    out,
                    "{:<12} {strategy:<15} {proxy:<15} {:>8} {:>8} {:>8} {:>8} {:>11}  {status}",
                    r.site_id, "", "", "", "", ""
                );
            }
        }
    }
    finish(w, &summary_path)?;
    let _ = writeln!(out, "{} sites, {failures} failed; results in {}", runs.len(), dir.display());
    Ok(out)
}

// -------------------------------------------------------------- proxy-eval

pub const EVAL_STRATEGIES: [Strategy; 3] = [Strategy::Nearest, Strategy::NetworkMedian, Strategy::SimilarAadt];

/// Scores every automatic proxy strategy at every reference site, treating
/// the reference as the sensor.
pub fn proxy_eval(config: &Path, overrides: &ThresholdOverrides, out_dir: Option<&Path>) -> CliResult<String> {
    let cfg = NetworkConfig::load(config)?;
    let monitor = monitor_config(&cfg, overrides)?;
    let series = read_series(&cfg.series_paths())?;
    let mut refs: Vec<_> = cfg.sites_with_role(Role::Reference).filter(|s| series.contains_key(&s.id)).collect();
    refs.sort_by(|a, b| a.id.cmp(&b.id));
    if refs.len() < 2 {
        return Err(CliError::input("proxy evaluation needs at least two reference sites with data"));
    }
    let jobs: Vec<_> = refs.iter().flat_map(|s| EVAL_STRATEGIES.map(|st| (*s, st))).collect();
    let results: Vec<Result<ProxyScore, String>> = jobs
        .par_iter()
        .map(|(site, strategy)| {
            let (assignment, proxy) = resolve_proxy(&cfg, &series, site, *strategy)?;
            evaluate_proxy(&series[&site.id], &proxy, &assignment, &monitor).map_err(|e| e.to_string())
        })
        .collect();

    let dir = cfg.output_dir(out_dir);
    create_dir(&dir)?;
    let path = dir.join("proxy_scores.csv");
    let mut w = csv_writer(&path)?;
    write_row(
        &mut w,
        &path,
        [
            "site_id",
            "strategy",
            "proxy_site_id",
            "alarm_ks_pct",
            "alarm_a0_pct",
            "alarm_a1_pct",
            "corrected_pct",
            "mab",
            "r2",
            "n_pairs",
        ],
    )?;
    let mut out = String::new();
    let mut per_strategy: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut chart: Vec<(String, Vec<Option<f64>>)> =
        EVAL_STRATEGIES.iter().map(|s| (s.as_str().to_string(), vec![None; refs.len()])).collect();
    for (((site, strategy), res), k) in jobs.iter().zip(&results).zip(0..) {
        match res {
            Ok(s) => {
                let [ks, a0, a1] = s.alarm_fraction.map(pct);
                write_row(
                    &mut w,
                    &path,
                    [
                        s.site_id.clone(),
                        strategy.as_str().into(),
                        s.proxy_site_id.clone().unwrap_or_default(),
                        ks,
                        a0,
                        a1,
                        pct(s.corrected_fraction),
                        s.mab.to_string(),
                        opt(s.r2),
                        s.n_pairs.to_string(),
                    ],
                )?;
                per_strategy.entry(strategy.as_str()).or_default().push(s.mab);
                chart[k % EVAL_STRATEGIES.len()].1[k / EVAL_STRATEGIES.len()] = Some(s.mab);
            }
            Err(reason) => {
                let _ = writeln!(out, "absent: {} {}: {reason}", site.id, strategy.as_str());
            }
        }
    }
    finish(w, &path)?;
    let cats: Vec<String> = refs.iter().map(|s| s.id.clone()).collect();
    let svg_path = dir.join("proxy_scores.svg");
    write_text(&svg_path, &svg::bar_chart("Proxy comparison", "MAB (ppb)", &cats, &chart))?;
    for st in EVAL_STRATEGIES {
        if let Some(v) = per_strategy.get(st.as_str()) {
            let _ = writeln!(
                out,
                "{:<15} sites {:>3}  mean MAB {:.3} ppb",
                st.as_str(),
                v.len(),
                v.iter().sum::<f64>() / v.len() as f64
            );
        }
    }
    let _ = writeln!(out, "scores in {}", path.display());
    Ok(out)
}

// ---------------------------------------------------------------- simulate

/// Where a scenario comes from.
pub enum ScenarioSource<'a> {
    File(&'a Path),
    Preset { name: &'a str, seed: u64 },
}

pub fn load_scenario(source: &ScenarioSource) -> CliResult<Scenario> {
    let scenario = match source {
        ScenarioSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
            toml::from_str::<Scenario>(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        }
        ScenarioSource::Preset { name, seed } => presets::by_name(name, *seed).ok_or_else(|| {
            CliError::input(format!("unknown preset {name:?}; choose one of {}", presets::NAMES.join(", ")))
        })?,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// SHA-256 of the scenario's canonical JSON form.
pub fn scenario_hash(s: &Scenario) -> CliResult<String> {
    let json = serde_json::to_vec(s).map_err(|e| CliError::runtime(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&json)))
}

#[derive(Serialize)]
struct Manifest<'a> {
    scenario: &'a str,
    seed: u64,
    config_hash: String,
    generator: &'a str,
    start: Hour,
    duration_hours: u32,
    files: [&'a str; 5],
}

/// Generates a scenario and writes observed and true series, a ready-to-run
/// network config, the resolved scenario and a manifest.
pub fn simulate(source: &ScenarioSource, out_dir: &Path) -> CliResult<String> {
    let scenario = load_scenario(source)?;
    let output = run_scenario(&scenario)?;
    create_dir(out_dir)?;
    write_series(&out_dir.join("series.csv"), &output.observed)?;
    write_series(&out_dir.join("truth.csv"), &output.truth)?;
    let network = NetworkConfig {
        series: vec![PathBuf::from("series.csv")],
        output_dir: PathBuf::from("out"),
        proxy: ProxySettings::default(),
        monitor: MonitorConfig::default(),
        sites: output.sites.clone(),
        base_dir: PathBuf::new(),
    };
    write_text(&out_dir.join("network.toml"), &network.to_toml()?)?;
    let scenario_toml = toml::to_string(&scenario).map_err(|e| CliError::runtime(e.to_string()))?;
    write_text(&out_dir.join("scenario.toml"), &scenario_toml)?;
    let manifest = Manifest {
        scenario: &scenario.name,
        seed: scenario.seed,
        config_hash: scenario_hash(&scenario)?,
        generator: GENERATOR_NAME,
        start: scenario.start,
        duration_hours: scenario.duration_hours,
        files: ["series.csv", "truth.csv", "network.toml", "scenario.toml", "manifest.json"],
    };
    let mut json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::runtime(e.to_string()))?;
    json.push('\n');
    write_text(&out_dir.join("manifest.json"), &json)?;
    Ok(format!(
        "scenario {} (seed {}): {} sites x {} hours written to {}\n",
        scenario.name,
        scenario.seed,
        output.sites.len(),
        scenario.duration_hours,
        out_dir.display()
    ))
}

// --------------------------------------------------------------------- map

/// Grid settings for `map`.
#[derive(Clone, Debug)]
pub struct MapOptions {
    pub hour: Hour,
    pub bbox: Option<BoundingBox>,
    pub cell_deg: f64,
    pub power: f64,
}

fn write_grid(path: &Path, field: &o3net::metrics::GridField) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, ["lat", "lon", "value_ppb"])?;
    for (lat, lon, v) in field.cells() {
        write_row(&mut w, path, [lat.to_string(), lon.to_string(), v.to_string()])?;
    }
    finish(w, path)
}

/// IDW maps at one hour: reference sites only, and the full network using
/// framework-corrected low-cost values.
pub fn map(
    config: &Path,
    overrides: &ThresholdOverrides,
    opts: &MapOptions,
    out_dir: Option<&Path>,
) -> CliResult<String> {
    let cfg = NetworkConfig::load(config)?;
    let monitor = monitor_config(&cfg, overrides)?;
    let series = read_series(&cfg.series_paths())?;
    let point = |id: &str, value: f64| {
        let s = cfg.site(id).expect("site from config");
        SitePoint { id: id.to_string(), lat: s.lat, lon: s.lon, value }
    };
    let reference: Vec<SitePoint> = cfg
        .sites_with_role(Role::Reference)
        .filter_map(|s| series.get(&s.id).and_then(|ts: &TimeSeries| ts.get(opts.hour)).map(|v| point(&s.id, v)))
        .collect();
    let mut full = reference.clone();
    for r in run_low_cost(&cfg, &series, &monitor, Some(opts.hour)) {
        let value = r
            .outcome
            .ok()
            .and_then(|m| m.ledger.history().last().filter(|h| h.hour == opts.hour).and_then(|h| h.output_value));
        if let Some(v) = value {
            full.push(point(&r.site_id, v));
        }
    }
    full.sort_by(|a, b| a.id.cmp(&b.id));
    if full.is_empty() {
        return Err(CliError::input(format!("no site reports a value at {}", opts.hour)));
    }
    let all_sites: Vec<SitePoint> = cfg.sites.iter().map(|s| point(&s.id, 0.0)).collect();
    let bbox = opts.bbox.or_else(|| BoundingBox::around(&all_sites, 0.05)).expect("non-empty site list");
    let (lo, hi) =
        full.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.value), hi.max(p.value)));

    let dir = cfg.output_dir(out_dir);
    create_dir(&dir)?;
    let mut out = String::new();
    for (name, points) in [("reference", &reference), ("network", &full)] {
        if points.is_empty() {
            let _ = writeln!(out, "{name}: no site reporting at {}", opts.hour);
            continue;
        }
        let field = idw_grid(points, bbox, opts.cell_deg, opts.power)?;
        write_grid(&dir.join(format!("map_{name}.csv")), &field)?;
        let title = format!("{name} sites, {}", opts.hour);
        write_text(&dir.join(format!("map_{name}.svg")), &svg::heatmap(&title, &field, points, lo, hi))?;
        let _ = writeln!(out, "{name}: {} sites, {}x{} cells", points.len(), field.rows, field.cols);
    }
    let _ = writeln!(out, "maps in {}", dir.display());
    Ok(out)
}
