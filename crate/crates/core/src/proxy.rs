// SPDX-License-Identifier: Apache-2.0

//! Proxy selection strategies and proxy-quality scoring.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::alarm::{run_monitor, MonitorConfig, TestKind};
use crate::error::{Error, Result};
use crate::metrics::{pair_metrics, PairMetrics};
use crate::timeseries::{align, Hour, HourRange, Observation, TimeSeries, WindowSlice};

/// Mean Earth radius used for great-circle distances, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Minimum monitor/reference overlap for scoring a proxy, hours.
pub const MIN_EVAL_OVERLAP_HOURS: usize = 30 * 24;

/// Minimum number of reporting sites for a network-median hour.
pub const MIN_MEDIAN_REPORTERS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Reference,
    LowCost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteRecord {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub role: Role,
    pub lat: f64,
    pub lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elevation_m: Option<f64>,
    /// Annual average daily traffic within 5 km, vehicles/day.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aadt_5km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub land_use: Option<String>,
}

impl SiteRecord {
    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::InvalidConfig(format!("site {}: coordinates out of range", self.id)));
        }
        if self.aadt_5km.is_some_and(|a| !(a >= 0.0)) {
            return Err(Error::InvalidConfig(format!("site {}: negative AADT", self.id)));
        }
        Ok(())
    }

    pub fn distance_km(&self, other: &SiteRecord) -> f64 {
        haversine_km(self.lat, self.lon, other.lat, other.lon)
    }
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Nearest,
    NetworkMedian,
    SimilarAadt,
    Explicit,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Nearest => "nearest",
            Strategy::NetworkMedian => "network_median",
            Strategy::SimilarAadt => "similar_aadt",
            Strategy::Explicit => "explicit",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyAssignment {
    pub test_site_id: String,
    pub strategy: Strategy,
    /// Absent for the network median.
    pub proxy_site_id: Option<String>,
    pub rationale: String,
}

fn other_references<'a>(site: &'a SiteRecord, network: &'a [SiteRecord]) -> impl Iterator<Item = &'a SiteRecord> {
    network.iter().filter(move |s| s.role == Role::Reference && s.id != site.id)
}

/// Picks the candidate minimizing `key`, ties to the smallest site id.
fn argmin_by_key<'a>(
    candidates: impl Iterator<Item = &'a SiteRecord>,
    key: impl Fn(&SiteRecord) -> f64,
) -> Option<(&'a SiteRecord, f64)> {
    candidates.map(|s| (s, key(s))).min_by(|(a, ka), (b, kb)| ka.total_cmp(kb).then_with(|| a.id.cmp(&b.id)))
}

/// The closest reference site other than `site`.
pub fn nearest_reference(site: &SiteRecord, network: &[SiteRecord]) -> Result<ProxyAssignment> {
    let (best, dist) = argmin_by_key(other_references(site, network), |r| site.distance_km(r)).ok_or_else(|| {
        Error::NoEligibleProxy { site: site.id.clone(), reason: "no other reference site in the network".into() }
    })?;
    Ok(ProxyAssignment {
        test_site_id: site.id.clone(),
        strategy: Strategy::Nearest,
        proxy_site_id: Some(best.id.clone()),
        rationale: format!("{dist:.2} km"),
    })
}

/// The reference site whose surrounding AADT is closest to `site`'s.
pub fn similar_aadt(site: &SiteRecord, network: &[SiteRecord]) -> Result<ProxyAssignment> {
    let target = site
        .aadt_5km
        .ok_or_else(|| Error::NoEligibleProxy { site: site.id.clone(), reason: "test site has no AADT".into() })?;
    let (best, diff) = argmin_by_key(other_references(site, network).filter(|r| r.aadt_5km.is_some()), |r| {
        (r.aadt_5km.unwrap_or(f64::NAN) - target).abs()
    })
    .ok_or_else(|| Error::NoEligibleProxy {
        site: site.id.clone(),
        reason: "no other reference site with AADT".into(),
    })?;
    Ok(ProxyAssignment {
        test_site_id: site.id.clone(),
        strategy: Strategy::SimilarAadt,
        proxy_site_id: Some(best.id.clone()),
        rationale: format!("AADT difference {diff:.0}"),
    })
}

/// A user-chosen proxy; must exist and differ from the test site.
pub fn explicit(site: &SiteRecord, proxy_id: &str, network: &[SiteRecord]) -> Result<ProxyAssignment> {
    if proxy_id == site.id || !network.iter().any(|s| s.id == proxy_id) {
        return Err(Error::NoEligibleProxy {
            site: site.id.clone(),
            reason: format!("explicit proxy {proxy_id:?} is not another site in the network"),
        });
    }
    Ok(ProxyAssignment {
        test_site_id: site.id.clone(),
        strategy: Strategy::Explicit,
        proxy_site_id: Some(proxy_id.to_string()),
        rationale: "configured".into(),
    })
}

pub fn network_median_assignment(site: &SiteRecord) -> ProxyAssignment {
    ProxyAssignment {
        test_site_id: site.id.clone(),
        strategy: Strategy::NetworkMedian,
        proxy_site_id: None,
        rationale: "median of all reporting sites".into(),
    }
}

fn median_in_place(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Hour-by-hour median across `network` over `range`. Hours with fewer than
/// three reporters are gaps. `exclude` drops one site id from the pool.
pub fn network_median_series(
    network: &[&TimeSeries],
    range: HourRange,
    exclude: Option<&str>,
    out_id: &str,
) -> Result<TimeSeries> {
    let mut by_hour: BTreeMap<Hour, Vec<f64>> = BTreeMap::new();
    for s in network.iter().filter(|s| Some(s.site_id()) != exclude) {
        for o in s.slice(range) {
            by_hour.entry(o.hour).or_default().push(o.value);
        }
    }
    let obs = by_hour
        .into_iter()
        .filter(|(_, v)| v.len() >= MIN_MEDIAN_REPORTERS)
        .map(|(h, mut v)| Observation::new(h, median_in_place(&mut v)))
        .collect();
    TimeSeries::new(out_id, obs)
}

/// Synthetic proxy window `(end - span_hours, end]` from the network median.
pub fn network_median(
    network: &[&TimeSeries],
    end: Hour,
    span_hours: u32,
    exclude: Option<&str>,
) -> Result<WindowSlice> {
    let range = HourRange::new(end.offset(1 - span_hours as i64), end);
    let series = network_median_series(network, range, exclude, "network-median")?;
    if series.is_empty() {
        return Err(Error::insufficient(format!(
            "fewer than {MIN_MEDIAN_REPORTERS} sites reporting in every hour of the window ending {end}"
        )));
    }
    Ok(WindowSlice::from_parts("network-median", end, span_hours, series.observations()))
}

/// How well a proxy serves a reference site treated as a sensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyScore {
    pub site_id: String,
    pub strategy: Strategy,
    pub proxy_site_id: Option<String>,
    /// Indexed KS, a0, a1.
    pub alarm_fraction: [f64; 3],
    pub corrected_fraction: f64,
    pub mab: f64,
    pub r2: Option<f64>,
    pub n_pairs: usize,
}

impl ProxyScore {
    pub fn alarm(&self, test: TestKind) -> f64 {
        let i = TestKind::ALL.iter().position(|&t| t == test).unwrap_or(0);
        self.alarm_fraction[i]
    }
}

/// Runs the monitor with a reference series standing in for the sensor and
/// scores the framework output against that same reference series.
pub fn evaluate_proxy(
    reference: &TimeSeries,
    proxy: &TimeSeries,
    assignment: &ProxyAssignment,
    config: &MonitorConfig,
) -> Result<ProxyScore> {
    let overlap = align(reference, proxy, None).len();
    if overlap < MIN_EVAL_OVERLAP_HOURS {
        return Err(Error::insufficient(format!(
            "site {}: {overlap} hours overlap with proxy, need {MIN_EVAL_OVERLAP_HOURS}",
            reference.site_id()
        )));
    }
    let run = run_monitor(reference, proxy, None, config)?;
    let summary = run.ledger.summary();
    let output = run.output_series()?;
    let m: PairMetrics = pair_metrics(&output, reference, None)?;
    Ok(ProxyScore {
        site_id: reference.site_id().to_string(),
        strategy: assignment.strategy,
        proxy_site_id: assignment.proxy_site_id.clone(),
        alarm_fraction: summary.alarm_fraction,
        corrected_fraction: summary.corrected_fraction,
        mab: m.mab,
        r2: m.r2,
        n_pairs: m.n_pairs,
    })
}
