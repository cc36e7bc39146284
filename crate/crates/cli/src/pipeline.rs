// SPDX-License-Identifier: Apache-2.0

//! Proxy resolution and per-site monitor runs shared by the commands.

use std::collections::BTreeMap;

use o3net::alarm::{run_monitor, MonitorConfig, MonitorRun};
use o3net::proxy::{
    explicit, nearest_reference, network_median_assignment, network_median_series, similar_aadt, ProxyAssignment, Role,
    SiteRecord, Strategy,
};
use o3net::{Hour, HourRange, TimeSeries};
use rayon::prelude::*;

use crate::config::NetworkConfig;

/// Hours covered by any series in `series`.
pub fn union_span<'a>(series: impl IntoIterator<Item = &'a TimeSeries>) -> Option<HourRange> {
    series
        .into_iter()
        .filter_map(TimeSeries::span)
        .reduce(|a, b| HourRange::new(Hour(a.start.0.min(b.start.0)), Hour(a.end.0.max(b.end.0))))
}

/// Reference series present in `series`, in site-id order.
pub fn reference_series<'a>(cfg: &NetworkConfig, series: &'a BTreeMap<String, TimeSeries>) -> Vec<&'a TimeSeries> {
    series.values().filter(|s| cfg.site(s.site_id()).is_some_and(|r| r.role == Role::Reference)).collect()
}

/// Resolves `strategy` for `site` into an assignment and the proxy series.
/// `Err` carries a human-readable reason the proxy is unavailable.
pub fn resolve_proxy(
    cfg: &NetworkConfig,
    series: &BTreeMap<String, TimeSeries>,
    site: &SiteRecord,
    strategy: Strategy,
) -> Result<(ProxyAssignment, TimeSeries), String> {
    let assignment = match strategy {
        Strategy::Nearest => nearest_reference(site, &cfg.sites),
        Strategy::SimilarAadt => similar_aadt(site, &cfg.sites),
        Strategy::Explicit => match cfg.proxy.overrides.get(&site.id) {
            Some(p) => explicit(site, p, &cfg.sites),
            None => return Err(format!("no explicit proxy configured for {}", site.id)),
        },
        Strategy::NetworkMedian => {
            let pool = reference_series(cfg, series);
            let range = union_span(pool.iter().copied()).ok_or("no reference data")?;
            let median =
                network_median_series(&pool, range, Some(&site.id), "network-median").map_err(|e| e.to_string())?;
            if median.is_empty() {
                return Err("network median has no hour with enough reporting sites".into());
            }
            return Ok((network_median_assignment(site), median));
        }
    }
    .map_err(|e| e.to_string())?;
    let id = assignment.proxy_site_id.as_deref().unwrap_or_default();
    match series.get(id) {
        Some(s) if !s.is_empty() => Ok((assignment.clone(), s.clone())),
        _ => Err(format!("proxy {id} has no data")),
    }
}

/// Strategy used for a low-cost site in `run`: an explicit override wins.
pub fn run_strategy(cfg: &NetworkConfig, site: &SiteRecord) -> Strategy {
    if cfg.proxy.overrides.contains_key(&site.id) {
        Strategy::Explicit
    } else {
        cfg.proxy.strategy
    }
}

/// One low-cost site's framework run.
pub struct SiteRun {
    pub site_id: String,
    pub assignment: Option<ProxyAssignment>,
    pub outcome: Result<MonitorRun, String>,
}

impl SiteRun {
    pub fn proxy_label(&self) -> String {
        match &self.assignment {
            Some(a) => a.proxy_site_id.clone().unwrap_or_else(|| "network-median".into()),
            None => String::new(),
        }
    }
}

/// Runs every low-cost site that has data, in parallel, ending at `until`
/// when given. Results come back in site-id order.
pub fn run_low_cost(
    cfg: &NetworkConfig,
    series: &BTreeMap<String, TimeSeries>,
    monitor: &MonitorConfig,
    until: Option<Hour>,
) -> Vec<SiteRun> {
    let mut sites: Vec<&SiteRecord> =
        cfg.sites_with_role(Role::LowCost).filter(|s| series.contains_key(&s.id)).collect();
    sites.sort_by(|a, b| a.id.cmp(&b.id));
    sites
        .par_iter()
        .map(|site| {
            let sensor = &series[&site.id];
            match resolve_proxy(cfg, series, site, run_strategy(cfg, site)) {
                Err(reason) => SiteRun { site_id: site.id.clone(), assignment: None, outcome: Err(reason) },
                Ok((assignment, proxy)) => {
                    let outcome = monitor_site(sensor, &proxy, monitor, until);
                    SiteRun { site_id: site.id.clone(), assignment: Some(assignment), outcome }
                }
            }
        })
        .collect()
}

fn monitor_site(
    sensor: &TimeSeries,
    proxy: &TimeSeries,
    monitor: &MonitorConfig,
    until: Option<Hour>,
) -> Result<MonitorRun, String> {
    let span = sensor.span().ok_or("sensor has no data")?;
    let end = until.map_or(span.end, |u| Hour(u.0.min(span.end.0)));
    if end < span.start {
        return Err(format!("sensor starts after {end}"));
    }
    let proxy_span = proxy.span().ok_or("proxy has no data")?;
    if proxy_span.end < span.start || proxy_span.start > end {
        return Err("proxy has no data over the sensor's span".into());
    }
    run_monitor(sensor, proxy, Some(HourRange::new(span.start, end)), monitor).map_err(|e| e.to_string())
}
