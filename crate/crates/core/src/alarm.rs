// SPDX-License-Identifier: Apache-2.0

//! Three-test control chart with persistence, and the hourly monitor that
//! drives it.
//!
//! Every hour the sensor window is compared with the proxy window by the KS
//! test and by moment matching. Each of the three conditions (KS p-value,
//! offset, gain) runs its own persistence clock. A condition that holds for
//! more than `tf_hours` of evaluated hours latches an alarm; the first clean
//! hour clears it. Hours without enough data freeze the clocks.

use serde::{Deserialize, Serialize};

use crate::distribution::ks_test;
use crate::error::{Error, Result};
use crate::moment::{mv_from_samples, CalibrationEstimate, EstimateHistory, EstimateSource, TrendEstimate};
use crate::timeseries::{Hour, HourRange, TimeSeries};

/// Control-chart limits and timescales.
///
/// The pass region for each test is the open interval; a value sitting
/// exactly on a limit is a breach.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub p_ks_min: f64,
    pub a1_low: f64,
    pub a1_high: f64,
    pub a0_low: f64,
    pub a0_high: f64,
    pub td_hours: u32,
    pub tf_hours: u32,
    pub completeness_min: f64,
    pub correction_alarm_count: u32,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            p_ks_min: 0.05,
            a1_low: 0.7,
            a1_high: 1.3,
            a0_low: -5.0,
            a0_high: 5.0,
            td_hours: 72,
            tf_hours: 120,
            completeness_min: 0.75,
            correction_alarm_count: 1,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.p_ks_min > 0.0 && self.p_ks_min < 1.0) {
            return bad("p_ks_min must lie in (0, 1)");
        }
        if !(self.a1_low < 1.0 && 1.0 < self.a1_high) {
            return bad("a1 limits must bracket 1");
        }
        if !(self.a0_low < 0.0 && 0.0 < self.a0_high) {
            return bad("a0 limits must bracket 0");
        }
        if self.td_hours == 0 || self.tf_hours == 0 {
            return bad("td_hours and tf_hours must be positive");
        }
        if !(0.0..=1.0).contains(&self.completeness_min) {
            return bad("completeness_min must lie in [0, 1]");
        }
        if !(1..=3).contains(&self.correction_alarm_count) {
            return bad("correction_alarm_count must be 1, 2 or 3");
        }
        Ok(())
    }
}

/// Monitor settings beyond the chart limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    pub thresholds: Thresholds,
    /// Which gain/offset estimate the a0/a1 tests look at.
    pub assessment: EstimateSource,
    /// Hours between refits of the quadratic trend.
    pub trend_refit_hours: u32,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig { thresholds: Thresholds::default(), assessment: EstimateSource::Trend, trend_refit_hours: 1 }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate()?;
        if self.trend_refit_hours == 0 {
            return Err(Error::InvalidConfig("trend_refit_hours must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Ks,
    A0,
    A1,
}

impl TestKind {
    pub const ALL: [TestKind; 3] = [TestKind::Ks, TestKind::A0, TestKind::A1];

    fn index(self) -> usize {
        match self {
            TestKind::Ks => 0,
            TestKind::A0 => 1,
            TestKind::A1 => 2,
        }
    }
}

/// Per-test breach flags for one hour. `None` means the test could not be
/// evaluated and its clock is frozen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breaches {
    pub ks: Option<bool>,
    pub a0: Option<bool>,
    pub a1: Option<bool>,
}

impl Breaches {
    pub fn frozen() -> Self {
        Breaches::default()
    }

    pub fn get(&self, test: TestKind) -> Option<bool> {
        match test {
            TestKind::Ks => self.ks,
            TestKind::A0 => self.a0,
            TestKind::A1 => self.a1,
        }
    }
}

fn outside_open(v: f64, lo: f64, hi: f64) -> bool {
    !(v > lo && v < hi)
}

/// Breach flags for a p-value and a gain/offset estimate.
pub fn evaluate_breaches(p_ks: f64, est: &CalibrationEstimate, th: &Thresholds) -> Breaches {
    Breaches {
        ks: Some(!(p_ks > th.p_ks_min)),
        a0: Some(outside_open(est.a0, th.a0_low, th.a0_high)),
        a1: Some(outside_open(est.a1, th.a1_low, th.a1_high)),
    }
}

/// Consecutive-breach counter for one test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersistenceClock {
    /// Evaluated hours the current breach episode has lasted.
    pub breach_hours: u32,
    pub breach_start: Option<Hour>,
    pub latched: bool,
}

impl PersistenceClock {
    fn update(&mut self, t: Hour, breach: Option<bool>, tf_hours: u32) {
        match breach {
            None => {}
            Some(false) => *self = PersistenceClock::default(),
            Some(true) => {
                if self.breach_hours == 0 {
                    self.breach_start = Some(t);
                }
                self.breach_hours += 1;
                if self.breach_hours > tf_hours {
                    self.latched = true;
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Verified,
    /// At least one window fell below the completeness threshold.
    Unverified,
}

/// One hour of the control chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub hour: Hour,
    pub status: Status,
    pub p_ks: Option<f64>,
    pub raw: Option<(f64, f64)>,
    pub trend: Option<(f64, f64)>,
    pub breaches: Breaches,
    pub alarms: [bool; 3],
    pub corrected: bool,
    pub raw_value: Option<f64>,
    pub output_value: Option<f64>,
}

impl HistoryRow {
    pub fn alarm(&self, test: TestKind) -> bool {
        self.alarms[test.index()]
    }
}

/// Persistence state and chart history for one site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlarmLedger {
    pub site_id: String,
    clocks: [PersistenceClock; 3],
    last_update: Option<Hour>,
    history: Vec<HistoryRow>,
}

impl AlarmLedger {
    pub fn new(site_id: impl Into<String>) -> Self {
        AlarmLedger { site_id: site_id.into(), clocks: Default::default(), last_update: None, history: Vec::new() }
    }

    pub fn clock(&self, test: TestKind) -> &PersistenceClock {
        &self.clocks[test.index()]
    }

    pub fn latched(&self, test: TestKind) -> bool {
        self.clock(test).latched
    }

    pub fn alarms(&self) -> [bool; 3] {
        [self.clocks[0].latched, self.clocks[1].latched, self.clocks[2].latched]
    }

    pub fn latched_count(&self) -> usize {
        self.clocks.iter().filter(|c| c.latched).count()
    }

    pub fn history(&self) -> &[HistoryRow] {
        &self.history
    }

    /// Advances each clock by one evaluated hour.
    pub fn update_persistence(&mut self, t: Hour, flags: Breaches, th: &Thresholds) -> Result<()> {
        if let Some(last) = self.last_update {
            if t <= last {
                return Err(Error::OutOfOrder { last, next: t });
            }
        }
        for test in TestKind::ALL {
            self.clocks[test.index()].update(t, flags.get(test), th.tf_hours);
        }
        self.last_update = Some(t);
        Ok(())
    }

    fn append(&mut self, row: HistoryRow) -> Result<()> {
        if let Some(last) = self.history.last() {
            if row.hour <= last.hour {
                return Err(Error::OutOfOrder { last: last.hour, next: row.hour });
            }
        }
        self.history.push(row);
        Ok(())
    }

    /// Alarm and correction percentages over verified hours.
    pub fn summary(&self) -> AlarmSummary {
        let verified: Vec<_> = self.history.iter().filter(|r| r.status == Status::Verified).collect();
        let n = verified.len();
        let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
        let mut alarm_fraction = [0.0; 3];
        for test in TestKind::ALL {
            alarm_fraction[test.index()] = frac(verified.iter().filter(|r| r.alarm(test)).count());
        }
        AlarmSummary {
            site_id: self.site_id.clone(),
            total_hours: self.history.len(),
            monitored_hours: n,
            alarm_fraction,
            corrected_fraction: frac(verified.iter().filter(|r| r.corrected).count()),
        }
    }
}

/// Fraction of verified hours each alarm was latched, and fraction corrected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlarmSummary {
    pub site_id: String,
    pub total_hours: usize,
    pub monitored_hours: usize,
    /// Indexed KS, a0, a1.
    pub alarm_fraction: [f64; 3],
    pub corrected_fraction: f64,
}

impl AlarmSummary {
    pub fn alarm(&self, test: TestKind) -> f64 {
        self.alarm_fraction[test.index()]
    }
}

/// True iff the number of latched alarms reaches `correction_alarm_count`.
pub fn decide_correction(ledger: &AlarmLedger, th: &Thresholds) -> bool {
    ledger.latched_count() >= th.correction_alarm_count as usize
}

/// Per-site state machine: one call to [`SiteMonitor::step`] per hour.
#[derive(Clone, Debug)]
pub struct SiteMonitor {
    config: MonitorConfig,
    estimates: EstimateHistory,
    ledger: AlarmLedger,
    cached_trend: Option<(Hour, TrendEstimate)>,
}

impl SiteMonitor {
    /// `origin` is the commencement of monitoring (time zero for the trend).
    pub fn new(site_id: impl Into<String>, origin: Hour, config: MonitorConfig) -> Result<Self> {
        config.validate()?;
        let site_id = site_id.into();
        Ok(SiteMonitor {
            config,
            estimates: EstimateHistory::new(site_id.clone(), origin),
            ledger: AlarmLedger::new(site_id),
            cached_trend: None,
        })
    }

    pub fn ledger(&self) -> &AlarmLedger {
        &self.ledger
    }

    pub fn estimates(&self) -> &EstimateHistory {
        &self.estimates
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    fn refresh_trend(&mut self, t: Hour) -> Option<TrendEstimate> {
        let due = match self.cached_trend {
            Some((at, _)) => t.hours_since(at) >= self.config.trend_refit_hours as i64,
            None => true,
        };
        if due {
            if let Some(tr) = self.estimates.latest_trend() {
                self.cached_trend = Some((t, tr));
            }
        }
        self.cached_trend.map(|(_, tr)| tr)
    }

    /// Processes hour `t`. Tests always run on the raw sensor series; the
    /// returned row carries the raw and output values for that hour.
    pub fn step(&mut self, t: Hour, sensor: &TimeSeries, proxy: &TimeSeries) -> Result<HistoryRow> {
        let th = self.config.thresholds.clone();
        let y = sensor.window(t, th.td_hours);
        let z = proxy.window(t, th.td_hours);
        let raw_value = sensor.get(t);

        let ks = match ks_test(&y, &z, th.completeness_min) {
            Ok(ks) => ks,
            Err(Error::InsufficientData(_)) => {
                self.ledger.update_persistence(t, Breaches::frozen(), &th)?;
                let row = HistoryRow {
                    hour: t,
                    status: Status::Unverified,
                    p_ks: None,
                    raw: None,
                    trend: None,
                    breaches: Breaches::frozen(),
                    alarms: self.ledger.alarms(),
                    corrected: false,
                    raw_value,
                    output_value: raw_value,
                };
                self.ledger.append(row)?;
                return Ok(row);
            }
            Err(e) => return Err(e),
        };

        let (raw_est, degenerate) = match mv_from_samples(t, &y.samples, &z.samples) {
            Ok(est) => {
                self.estimates.push(est)?;
                (Some(est), false)
            }
            Err(Error::DegenerateSensorWindow { .. } | Error::DegenerateProxyWindow { .. }) => (None, true),
            Err(e) => return Err(e),
        };
        let trend = self.refresh_trend(t);

        let assessed = match self.config.assessment {
            EstimateSource::Raw => raw_est,
            EstimateSource::Trend => trend.map(|tr| tr.estimate).or(raw_est),
        };
        let th_ref = &self.config.thresholds;
        let mut breaches = match assessed {
            Some(est) => evaluate_breaches(ks.p_value, &est, th_ref),
            None => Breaches { ks: Some(!(ks.p_value > th_ref.p_ks_min)), a0: None, a1: None },
        };
        if degenerate {
            breaches.a1 = Some(true);
        }
        self.ledger.update_persistence(t, breaches, &th)?;

        let corrected_estimate = if decide_correction(&self.ledger, &th) {
            trend.map(|tr| tr.estimate).or_else(|| self.estimates.raw().last().copied())
        } else {
            None
        };
        let (corrected, output_value) = match (corrected_estimate, raw_value) {
            (Some(est), Some(v)) => (true, Some(est.apply(v))),
            (Some(_), None) => (true, None),
            (None, v) => (false, v),
        };

        let row = HistoryRow {
            hour: t,
            status: Status::Verified,
            p_ks: Some(ks.p_value),
            raw: raw_est.map(|e| (e.a0, e.a1)),
            trend: trend.map(|tr| (tr.estimate.a0, tr.estimate.a1)),
            breaches,
            alarms: self.ledger.alarms(),
            corrected,
            raw_value,
            output_value,
        };
        self.ledger.append(row)?;
        Ok(row)
    }

    pub fn into_parts(self) -> (AlarmLedger, EstimateHistory) {
        (self.ledger, self.estimates)
    }
}

/// Output of running a monitor over a span of hours.
#[derive(Clone, Debug)]
pub struct MonitorRun {
    pub ledger: AlarmLedger,
    pub estimates: EstimateHistory,
}

impl MonitorRun {
    /// Hourly output series (corrected where the framework corrected).
    pub fn output_series(&self) -> Result<TimeSeries> {
        TimeSeries::from_hourly_rows(&self.ledger.site_id, self.ledger.history(), |r| r.output_value)
    }
}

impl TimeSeries {
    fn from_hourly_rows(
        site_id: &str,
        rows: &[HistoryRow],
        value: impl Fn(&HistoryRow) -> Option<f64>,
    ) -> Result<TimeSeries> {
        let obs =
            rows.iter().filter_map(|r| value(r).map(|v| crate::timeseries::Observation::new(r.hour, v))).collect();
        TimeSeries::new(site_id, obs)
    }
}

/// Steps a fresh monitor over every hour of `range` (default: the sensor's
/// span). The commencement is the first hour of the range.
pub fn run_monitor(
    sensor: &TimeSeries,
    proxy: &TimeSeries,
    range: Option<HourRange>,
    config: &MonitorConfig,
) -> Result<MonitorRun> {
    let range = match range.or_else(|| sensor.span()) {
        Some(r) => r,
        None => return Err(Error::insufficient(format!("sensor series {} is empty", sensor.site_id()))),
    };
    let mut monitor = SiteMonitor::new(sensor.site_id(), range.start, config.clone())?;
    for t in range.hours() {
        monitor.step(t, sensor, proxy)?;
    }
    let (ledger, estimates) = monitor.into_parts();
    Ok(MonitorRun { ledger, estimates })
}
