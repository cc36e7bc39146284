// SPDX-License-Identifier: Apache-2.0

//! Hourly site series, rolling windows and pairwise alignment.
//!
//! Every observation is labelled by the start of its hour: a reading taken at
//! any instant in `[H, H + 1h)` belongs to hour `H`. Gaps are never imputed;
//! a missing hour is simply absent from the series.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SECONDS_PER_HOUR: i64 = 3600;

/// A whole UTC hour, counted from the Unix epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hour(pub i64);

impl Hour {
    /// The hour containing `unix_seconds` (floor division, so pre-epoch
    /// instants land in the right bucket too).
    pub fn containing(unix_seconds: i64) -> Hour {
        Hour(unix_seconds.div_euclid(SECONDS_PER_HOUR))
    }

    pub fn unix_seconds(self) -> i64 {
        self.0 * SECONDS_PER_HOUR
    }

    pub fn offset(self, hours: i64) -> Hour {
        Hour(self.0 + hours)
    }

    /// Whole hours from `earlier` to `self`.
    pub fn hours_since(self, earlier: Hour) -> i64 {
        self.0 - earlier.0
    }

    /// Hour of day in `0..24`.
    pub fn hour_of_day(self) -> u32 {
        self.0.rem_euclid(24) as u32
    }

    /// Parses `YYYY-MM-DDTHH:00:00Z`. Offsets other than `Z`, and timestamps
    /// with nonzero minutes or seconds, are rejected.
    pub fn parse_iso(s: &str) -> Result<Hour> {
        let body = s
            .strip_suffix('Z')
            .ok_or_else(|| Error::InvalidSeries(format!("timestamp {s:?} is not UTC ('Z' suffix required)")))?;
        let naive = NaiveDateTime::parse_from_str(body, "%Y-%m-%dT%H:%M:%S")
            .map_err(|e| Error::InvalidSeries(format!("timestamp {s:?}: {e}")))?;
        if naive.minute() != 0 || naive.second() != 0 || naive.nanosecond() != 0 {
            return Err(Error::InvalidSeries(format!("timestamp {s:?} is not hour-aligned")));
        }
        Ok(Hour::containing(naive.and_utc().timestamp()))
    }
}

impl fmt::Display for Hour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match DateTime::<Utc>::from_timestamp(self.unix_seconds(), 0) {
            Some(dt) => write!(f, "{}", dt.format("%Y-%m-%dT%H:00:00Z")),
            None => write!(f, "hour#{}", self.0),
        }
    }
}

impl FromStr for Hour {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Hour::parse_iso(s)
    }
}

impl Serialize for Hour {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Hour {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Hour::parse_iso(&s).map_err(serde::de::Error::custom)
    }
}

/// Inclusive range of hours.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourRange {
    pub start: Hour,
    pub end: Hour,
}

impl HourRange {
    pub fn new(start: Hour, end: Hour) -> Self {
        HourRange { start, end }
    }

    pub fn contains(&self, h: Hour) -> bool {
        self.start <= h && h <= self.end
    }

    pub fn hours(&self) -> impl Iterator<Item = Hour> {
        (self.start.0..=self.end.0).map(Hour)
    }

    pub fn len(&self) -> usize {
        (self.end.0 - self.start.0 + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

/// One hourly value, in ppb.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub hour: Hour,
    pub value: f64,
}

impl Observation {
    pub fn new(hour: Hour, value: f64) -> Self {
        Observation { hour, value }
    }
}

/// A reading at arbitrary cadence, before hourly averaging.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawSample {
    pub unix_seconds: i64,
    pub value: f64,
}

/// Hourly series for one site. Hours are strictly increasing and values finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    site_id: String,
    observations: Vec<Observation>,
}

impl TimeSeries {
    pub fn new(site_id: impl Into<String>, observations: Vec<Observation>) -> Result<Self> {
        let site_id = site_id.into();
        for pair in observations.windows(2) {
            if pair[1].hour <= pair[0].hour {
                return Err(Error::OutOfOrder { last: pair[0].hour, next: pair[1].hour });
            }
        }
        if let Some(bad) = observations.iter().find(|o| !o.value.is_finite()) {
            return Err(Error::InvalidSeries(format!("site {site_id}: non-finite value at {}", bad.hour)));
        }
        Ok(TimeSeries { site_id, observations })
    }

    /// Builds a series from consecutive hours starting at `start`; `None` entries are gaps.
    pub fn from_hourly(
        site_id: impl Into<String>,
        start: Hour,
        values: impl IntoIterator<Item = Option<f64>>,
    ) -> Result<Self> {
        let obs = values
            .into_iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| Observation::new(start.offset(i as i64), v)))
            .collect();
        TimeSeries::new(site_id, obs)
    }

    pub fn empty(site_id: impl Into<String>) -> Self {
        TimeSeries { site_id: site_id.into(), observations: Vec::new() }
    }

    pub fn site_id(&self) -> &str {
        &self.site_id
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|o| o.value)
    }

    pub fn first_hour(&self) -> Option<Hour> {
        self.observations.first().map(|o| o.hour)
    }

    pub fn last_hour(&self) -> Option<Hour> {
        self.observations.last().map(|o| o.hour)
    }

    pub fn span(&self) -> Option<HourRange> {
        Some(HourRange::new(self.first_hour()?, self.last_hour()?))
    }

    pub fn get(&self, hour: Hour) -> Option<f64> {
        self.observations.binary_search_by_key(&hour, |o| o.hour).ok().map(|i| self.observations[i].value)
    }

    /// Observations with `lo < hour <= hi`.
    fn half_open(&self, lo: Hour, hi: Hour) -> &[Observation] {
        let a = self.observations.partition_point(|o| o.hour <= lo);
        let b = self.observations.partition_point(|o| o.hour <= hi);
        &self.observations[a..b.max(a)]
    }

    /// Observations whose hour lies in `range` (inclusive).
    pub fn slice(&self, range: HourRange) -> &[Observation] {
        self.half_open(range.start.offset(-1), range.end)
    }

    /// The rolling window `(end - span_hours, end]`.
    pub fn window(&self, end: Hour, span_hours: u32) -> WindowSlice {
        assert!(span_hours > 0, "window span must be positive");
        let start = end.offset(-(span_hours as i64));
        let obs = self.half_open(start, end);
        WindowSlice {
            site_id: self.site_id.clone(),
            start,
            end,
            span_hours,
            hours: obs.iter().map(|o| o.hour).collect(),
            samples: obs.iter().map(|o| o.value).collect(),
        }
    }

    /// Applies `f` to every value, keeping timestamps.
    pub fn map_values(&self, mut f: impl FnMut(Hour, f64) -> f64) -> Result<TimeSeries> {
        let obs = self.observations.iter().map(|o| Observation::new(o.hour, f(o.hour, o.value))).collect();
        TimeSeries::new(self.site_id.clone(), obs)
    }
}

/// Samples of one series over `(start, end]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSlice {
    pub site_id: String,
    pub start: Hour,
    pub end: Hour,
    pub span_hours: u32,
    pub hours: Vec<Hour>,
    pub samples: Vec<f64>,
}

impl WindowSlice {
    /// Window built directly from values; used for synthetic proxies.
    pub fn from_parts(site_id: impl Into<String>, end: Hour, span_hours: u32, obs: &[Observation]) -> Self {
        WindowSlice {
            site_id: site_id.into(),
            start: end.offset(-(span_hours as i64)),
            end,
            span_hours,
            hours: obs.iter().map(|o| o.hour).collect(),
            samples: obs.iter().map(|o| o.value).collect(),
        }
    }

    /// Fraction of the expected hourly slots that hold a sample.
    pub fn completeness(&self) -> f64 {
        self.samples.len() as f64 / self.span_hours as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Returns `InsufficientData` when completeness is below `min`.
    pub fn require_complete(&self, min: f64) -> Result<()> {
        if self.completeness() + 1e-12 < min || self.samples.is_empty() {
            Err(Error::insufficient(format!(
                "site {} window ending {}: completeness {:.3} below {:.3}",
                self.site_id,
                self.end,
                self.completeness(),
                min
            )))
        } else {
            Ok(())
        }
    }
}

/// Averages raw readings into hourly observations. Hours without readings
/// stay absent.
pub fn resample_hourly(site_id: impl Into<String>, raw: &[RawSample]) -> Result<TimeSeries> {
    let mut obs: Vec<Observation> = Vec::new();
    let mut current: Option<(Hour, f64, usize)> = None;
    for s in raw {
        let h = Hour::containing(s.unix_seconds);
        match current {
            Some((ch, sum, n)) if ch == h => current = Some((ch, sum + s.value, n + 1)),
            Some((ch, sum, n)) => {
                if h < ch {
                    return Err(Error::OutOfOrder { last: ch, next: h });
                }
                obs.push(Observation::new(ch, sum / n as f64));
                current = Some((h, s.value, 1));
            }
            None => current = Some((h, s.value, 1)),
        }
    }
    if let Some((ch, sum, n)) = current {
        obs.push(Observation::new(ch, sum / n as f64));
    }
    TimeSeries::new(site_id, obs)
}

/// Pairs of co-timed values `(a, b)` for hours present in both series, in
/// hour order. `range` limits the hours considered.
pub fn align(a: &TimeSeries, b: &TimeSeries, range: Option<HourRange>) -> Vec<(Hour, f64, f64)> {
    let (xa, xb) = match range {
        Some(r) => (a.slice(r), b.slice(r)),
        None => (a.observations(), b.observations()),
    };
    let mut out = Vec::with_capacity(xa.len().min(xb.len()));
    let (mut i, mut j) = (0, 0);
    while i < xa.len() && j < xb.len() {
        match xa[i].hour.cmp(&xb[j].hour) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push((xa[i].hour, xa[i].value, xb[j].value));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(n: i64) -> Hour {
        Hour(400_000 + n)
    }

    #[test]
    fn iso_round_trip() {
        let hour = Hour::parse_iso("2018-01-01T05:00:00Z").unwrap();
        assert_eq!(hour.to_string(), "2018-01-01T05:00:00Z");
        assert_eq!(hour.hour_of_day(), 5);
    }

    #[test]
    fn iso_rejects_offsets_and_minutes() {
        assert!(Hour::parse_iso("2018-01-01T05:00:00+02:00").is_err());
        assert!(Hour::parse_iso("2018-01-01T05:00:00").is_err());
        assert!(Hour::parse_iso("2018-01-01T05:30:00Z").is_err());
        assert!(Hour::parse_iso("garbage").is_err());
    }

    #[test]
    fn resample_constant_minutes() {
        let base = h(0).unix_seconds();
        let raw: Vec<_> = (0..60).map(|m| RawSample { unix_seconds: base + 60 * m, value: 40.0 }).collect();
        let s = resample_hourly("S", &raw).unwrap();
        assert_eq!(s.observations(), &[Observation::new(h(0), 40.0)]);
    }

    #[test]
    fn resample_mean_and_gap() {
        let base = h(0).unix_seconds();
        let raw = [
            RawSample { unix_seconds: base, value: 10.0 },
            RawSample { unix_seconds: base + 1200, value: 20.0 },
            RawSample { unix_seconds: base + 3599, value: 30.0 },
            // hour 1 empty
            RawSample { unix_seconds: base + 2 * 3600, value: 7.0 },
        ];
        let s = resample_hourly("S", &raw).unwrap();
        assert_eq!(s.observations(), &[Observation::new(h(0), 20.0), Observation::new(h(2), 7.0)]);
        assert!(resample_hourly("S", &[]).unwrap().is_empty());
    }

    #[test]
    fn resample_is_idempotent_on_hourly() {
        let s = TimeSeries::from_hourly("S", h(0), [Some(1.0), None, Some(3.5), Some(-2.0)]).unwrap();
        let raw: Vec<_> = s
            .observations()
            .iter()
            .map(|o| RawSample { unix_seconds: o.hour.unix_seconds(), value: o.value })
            .collect();
        assert_eq!(resample_hourly("S", &raw).unwrap(), s);
    }

    #[test]
    fn new_rejects_duplicates_and_nan() {
        let dup = vec![Observation::new(h(1), 1.0), Observation::new(h(1), 2.0)];
        assert!(matches!(TimeSeries::new("S", dup), Err(Error::OutOfOrder { .. })));
        let nan = vec![Observation::new(h(1), f64::NAN)];
        assert!(TimeSeries::new("S", nan).is_err());
    }

    #[test]
    fn window_completeness() {
        let full = TimeSeries::from_hourly("S", h(1), (0..72).map(|i| Some(i as f64))).unwrap();
        let w = full.window(h(72), 72);
        assert_eq!(w.len(), 72);
        assert_eq!(w.completeness(), 1.0);
        assert!(w.hours.iter().all(|&x| x > h(0) && x <= h(72)));

        let half = TimeSeries::from_hourly("S", h(1), (0..72).map(|i| (i % 2 == 0).then_some(1.0))).unwrap();
        assert_eq!(half.window(h(72), 72).completeness(), 0.5);

        let before = full.window(h(500), 72);
        assert!(before.is_empty());
        assert_eq!(before.completeness(), 0.0);
        assert!(before.require_complete(0.75).is_err());
    }

    #[test]
    fn window_excludes_start_includes_end() {
        let s = TimeSeries::from_hourly("S", h(0), (0..10).map(|i| Some(i as f64))).unwrap();
        let w = s.window(h(5), 3);
        assert_eq!(w.samples, vec![3.0, 4.0, 5.0]);
    }

    #[test]
    fn align_intersection() {
        let a = TimeSeries::from_hourly("A", h(1), [Some(1.0), Some(2.0), Some(3.0)]).unwrap();
        let b = TimeSeries::from_hourly("B", h(2), [Some(20.0), Some(30.0), Some(40.0)]).unwrap();
        let pairs = align(&a, &b, None);
        assert_eq!(pairs, vec![(h(2), 2.0, 20.0), (h(3), 3.0, 30.0)]);

        let c = TimeSeries::from_hourly("C", h(100), [Some(1.0)]).unwrap();
        assert!(align(&a, &c, None).is_empty());

        let ranged = align(&a, &b, Some(HourRange::new(h(3), h(3))));
        assert_eq!(ranged, vec![(h(3), 3.0, 30.0)]);
    }

    #[test]
    fn align_with_self() {
        let a = TimeSeries::from_hourly("A", h(0), [Some(1.0), None, Some(3.0)]).unwrap();
        let pairs = align(&a, &a, None);
        assert_eq!(pairs.len(), a.len());
        assert!(pairs.iter().all(|&(_, x, y)| x == y));
    }
}
