// SPDX-License-Identifier: Apache-2.0

//! Mean-variance moment matching and long-term trend smoothing of the
//! resulting gain/offset estimates.
//!
//! Given a sensor window `y` and a proxy window `z`, the gain and offset
//!
//! ```text
//! a1 = sqrt(var(z) / var(y))
//! a0 = mean(z) - a1 * mean(y)
//! ```
//!
//! map the sensor window's first two moments exactly onto the proxy's.
//! Applying `x = a0 + a1 * y` is the semi-blind correction: no paired
//! sensor/reference samples are needed, only a proxy whose distribution over
//! the window resembles the site's.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{Hour, WindowSlice};

/// Variance at or below this (ppb^2) marks a flat-lined window.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Whether an estimate came straight from one window or from the trend fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateSource {
    Raw,
    Trend,
}

/// Offset `a0` (ppb) and gain `a1` (> 0) at one hour.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEstimate {
    pub hour: Hour,
    pub a0: f64,
    pub a1: f64,
    pub source: EstimateSource,
}

impl CalibrationEstimate {
    pub fn identity(hour: Hour) -> Self {
        CalibrationEstimate { hour, a0: 0.0, a1: 1.0, source: EstimateSource::Raw }
    }

    /// Semi-blind correction `a0 + a1 * y`.
    pub fn apply(&self, y: f64) -> f64 {
        self.a0 + self.a1 * y
    }
}

pub fn apply_correction(est: &CalibrationEstimate, y: f64) -> f64 {
    est.apply(y)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (divisor `n - 1`), two-pass.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Moment-matching estimate from raw sample slices.
pub fn mv_from_samples(hour: Hour, y: &[f64], z: &[f64]) -> Result<CalibrationEstimate> {
    if y.len() < 2 || z.len() < 2 {
        return Err(Error::insufficient("moment matching needs at least two samples per window"));
    }
    let var_y = sample_variance(y);
    if var_y <= DEGENERATE_VARIANCE {
        return Err(Error::DegenerateSensorWindow { variance: var_y });
    }
    let var_z = sample_variance(z);
    if var_z <= DEGENERATE_VARIANCE {
        return Err(Error::DegenerateProxyWindow { variance: var_z });
    }
    let a1 = (var_z / var_y).sqrt();
    let a0 = mean(z) - a1 * mean(y);
    Ok(CalibrationEstimate { hour, a0, a1, source: EstimateSource::Raw })
}

/// Moment-matching estimate for a sensor window `y` against a proxy window `z`.
pub fn mv_estimate(y: &WindowSlice, z: &WindowSlice, completeness_min: f64) -> Result<CalibrationEstimate> {
    y.require_complete(completeness_min)?;
    z.require_complete(completeness_min)?;
    mv_from_samples(y.end, &y.samples, &z.samples)
}

/// Incremental least-squares fit of `v = c0 + c1 t + c2 t^2`.
///
/// Power sums are accumulated relative to the first abscissa and rescaled to
/// `[0, 1]` when solving, which keeps the 3x3 normal equations well
/// conditioned for spans of months at hourly resolution.
#[derive(Clone, Debug, Default)]
pub struct QuadraticFit {
    origin: Option<f64>,
    scale: f64,
    s: [f64; 5],
    sv: [f64; 3],
}

impl QuadraticFit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.s[0] as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, t: f64, v: f64) {
        let origin = *self.origin.get_or_insert(t);
        let u = t - origin;
        self.scale = self.scale.max(u.abs());
        let mut p = 1.0;
        for k in 0..5 {
            self.s[k] += p;
            if k < 3 {
                self.sv[k] += p * v;
            }
            p *= u;
        }
    }

    /// Fitted value at `t`, or `None` with fewer than three points (or
    /// collinear abscissae).
    pub fn eval(&self, t: f64) -> Option<f64> {
        if self.len() < 3 || self.scale == 0.0 {
            return None;
        }
        let origin = self.origin?;
        let l = self.scale;
        let sc = |k: usize| l.powi(k as i32);
        let m = [
            [self.s[0], self.s[1] / sc(1), self.s[2] / sc(2)],
            [self.s[1] / sc(1), self.s[2] / sc(2), self.s[3] / sc(3)],
            [self.s[2] / sc(2), self.s[3] / sc(3), self.s[4] / sc(4)],
        ];
        let rhs = [self.sv[0], self.sv[1] / sc(1), self.sv[2] / sc(2)];
        let c = solve3(m, rhs)?;
        let x = (t - origin) / l;
        Some(c[0] + x * (c[1] + x * c[2]))
    }
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (dst, src) in a[row].iter_mut().zip(pivot_row).skip(col) {
                *dst -= f * src;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Trend value plus whether the fit fell back to the latest raw estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrendEstimate {
    pub estimate: CalibrationEstimate,
    pub fallback: bool,
}

/// Raw estimates for one site, with an expanding-window quadratic trend
/// anchored at the commencement of monitoring.
#[derive(Clone, Debug)]
pub struct EstimateHistory {
    site_id: String,
    origin: Hour,
    raw: Vec<CalibrationEstimate>,
    fit_a0: QuadraticFit,
    fit_a1: QuadraticFit,
}

impl EstimateHistory {
    /// `origin` is time zero; elapsed time is measured in hours from it.
    pub fn new(site_id: impl Into<String>, origin: Hour) -> Self {
        EstimateHistory {
            site_id: site_id.into(),
            origin,
            raw: Vec::new(),
            fit_a0: QuadraticFit::new(),
            fit_a1: QuadraticFit::new(),
        }
    }

    pub fn site_id(&self) -> &str {
        &self.site_id
    }

    pub fn origin(&self) -> Hour {
        self.origin
    }

    pub fn raw(&self) -> &[CalibrationEstimate] {
        &self.raw
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    fn elapsed(&self, h: Hour) -> f64 {
        h.hours_since(self.origin) as f64
    }

    pub fn push(&mut self, est: CalibrationEstimate) -> Result<()> {
        if let Some(last) = self.raw.last() {
            if est.hour <= last.hour {
                return Err(Error::OutOfOrder { last: last.hour, next: est.hour });
            }
        }
        let tau = self.elapsed(est.hour);
        self.fit_a0.push(tau, est.a0);
        self.fit_a1.push(tau, est.a1);
        self.raw.push(CalibrationEstimate { source: EstimateSource::Raw, ..est });
        Ok(())
    }

    /// Trend at the most recent raw estimate, from the running fit.
    pub fn latest_trend(&self) -> Option<TrendEstimate> {
        let last = *self.raw.last()?;
        Some(trend_from_fits(&self.fit_a0, &self.fit_a1, self.elapsed(last.hour), last))
    }

    /// Quadratic trend evaluated at `t`, fitted to raw estimates in `[origin, t]`.
    pub fn trend_at(&self, t: Hour) -> Option<TrendEstimate> {
        let upto = self.raw.partition_point(|e| e.hour <= t);
        if upto == 0 {
            return None;
        }
        if upto == self.raw.len() && self.raw[upto - 1].hour == t {
            return self.latest_trend();
        }
        let (mut f0, mut f1) = (QuadraticFit::new(), QuadraticFit::new());
        for e in self.raw[..upto].iter().filter(|e| e.hour >= self.origin) {
            f0.push(self.elapsed(e.hour), e.a0);
            f1.push(self.elapsed(e.hour), e.a1);
        }
        let last = self.raw[upto - 1];
        Some(trend_from_fits(&f0, &f1, self.elapsed(t), CalibrationEstimate { hour: t, ..last }))
    }
}

fn trend_from_fits(f0: &QuadraticFit, f1: &QuadraticFit, tau: f64, last: CalibrationEstimate) -> TrendEstimate {
    match (f0.eval(tau), f1.eval(tau)) {
        (Some(a0), Some(a1)) if a1 > 0.0 => TrendEstimate {
            estimate: CalibrationEstimate { hour: last.hour, a0, a1, source: EstimateSource::Trend },
            fallback: false,
        },
        _ => TrendEstimate { estimate: last, fallback: true },
    }
}

/// Trend at `t` for a history; falls back (flagged) to the latest raw
/// estimate when fewer than three estimates exist.
pub fn quadratic_trend(history: &EstimateHistory, t: Hour) -> Option<TrendEstimate> {
    history.trend_at(t)
}

/// One point of the trend/fluctuation split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decomposed {
    pub hour: Hour,
    pub trend_a0: f64,
    pub trend_a1: f64,
    pub residual_a0: f64,
    pub residual_a1: f64,
}

/// Splits each raw estimate into the trend as known at that hour and the
/// short-term residual `raw - trend`.
pub fn decompose(history: &EstimateHistory) -> Vec<Decomposed> {
    let mut f0 = QuadraticFit::new();
    let mut f1 = QuadraticFit::new();
    history
        .raw()
        .iter()
        .map(|e| {
            let tau = e.hour.hours_since(history.origin()) as f64;
            f0.push(tau, e.a0);
            f1.push(tau, e.a1);
            let t = trend_from_fits(&f0, &f1, tau, *e).estimate;
            Decomposed {
                hour: e.hour,
                trend_a0: t.a0,
                trend_a1: t.a1,
                residual_a0: e.a0 - t.a0,
                residual_a1: e.a1 - t.a1,
            }
        })
        .collect()
}
