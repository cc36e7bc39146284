// SPDX-License-Identifier: Apache-2.0

//! Pairwise accuracy metrics, buddy co-location checks and IDW gridding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proxy::haversine_km;
use crate::timeseries::{align, Hour, HourRange, TimeSeries};

/// Minimum co-located hours for a buddy check.
pub const MIN_BUDDY_HOURS: usize = 48;

/// Share of hours that must agree within tolerance for a buddy check to pass.
pub const BUDDY_PASS_FRACTION: f64 = 0.95;

/// Default buddy agreement tolerance, ppb.
pub const BUDDY_TOLERANCE_PPB: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub n_pairs: usize,
    /// Mean absolute bias, ppb.
    pub mab: f64,
    /// Squared Pearson correlation; absent when either side has zero variance.
    pub r2: Option<f64>,
    /// Root mean square deviation, ppb.
    pub rmsd: f64,
}

/// Metrics over aligned `(a, b)` pairs.
pub fn metrics_from_pairs(pairs: &[(f64, f64)]) -> Result<PairMetrics> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::insufficient(format!("{n} aligned pairs, need at least 2")));
    }
    let nf = n as f64;
    let mab = pairs.iter().map(|(a, b)| (a - b).abs()).sum::<f64>() / nf;
    let rmsd = (pairs.iter().map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / nf).sqrt();
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in pairs {
        let (da, db) = (a - ma, b - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    let r2 = if saa > 0.0 && sbb > 0.0 { Some(((sab * sab) / (saa * sbb)).min(1.0)) } else { None };
    Ok(PairMetrics { n_pairs: n, mab, r2, rmsd })
}

/// MAB, R^2 and RMSD between two series over their common hours.
pub fn pair_metrics(a: &TimeSeries, b: &TimeSeries, range: Option<HourRange>) -> Result<PairMetrics> {
    let pairs: Vec<(f64, f64)> = align(a, b, range).into_iter().map(|(_, x, y)| (x, y)).collect();
    metrics_from_pairs(&pairs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuddyReport {
    /// `local - buddy` for each co-located hour.
    pub diffs: Vec<(Hour, f64)>,
    pub fraction_within: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares a fixed sensor with a co-located transfer ("buddy") sensor.
/// Passes when at least 95% of hours agree within `tolerance`.
pub fn buddy_check(buddy: &TimeSeries, local: &TimeSeries, tolerance: f64) -> Result<BuddyReport> {
    let pairs = align(local, buddy, None);
    if pairs.len() < MIN_BUDDY_HOURS {
        return Err(Error::insufficient(format!("{} co-located hours, need {MIN_BUDDY_HOURS}", pairs.len())));
    }
    let diffs: Vec<(Hour, f64)> = pairs.iter().map(|&(h, l, b)| (h, l - b)).collect();
    let within = diffs.iter().filter(|(_, d)| d.abs() <= tolerance).count();
    let fraction_within = within as f64 / diffs.len() as f64;
    Ok(BuddyReport { diffs, fraction_within, tolerance, pass: fraction_within >= BUDDY_PASS_FRACTION })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SitePoint {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    /// Box around `points` padded by `pad_deg` on each side.
    pub fn around(points: &[SitePoint], pad_deg: f64) -> Option<BoundingBox> {
        let first = points.first()?;
        let mut b = BoundingBox { lat_min: first.lat, lat_max: first.lat, lon_min: first.lon, lon_max: first.lon };
        for p in points {
            b.lat_min = b.lat_min.min(p.lat);
            b.lat_max = b.lat_max.max(p.lat);
            b.lon_min = b.lon_min.min(p.lon);
            b.lon_max = b.lon_max.max(p.lon);
        }
        Some(BoundingBox {
            lat_min: b.lat_min - pad_deg,
            lat_max: b.lat_max + pad_deg,
            lon_min: b.lon_min - pad_deg,
            lon_max: b.lon_max + pad_deg,
        })
    }
}

/// Regular lat/lon grid of interpolated values, row-major from the south-west corner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub bbox: BoundingBox,
    pub cell_deg: f64,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (self.bbox.lat_min + (row as f64 + 0.5) * self.cell_deg, self.bbox.lon_min + (col as f64 + 0.5) * self.cell_deg)
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// `(lat, lon, value)` for every cell.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (0..self.cols).map(move |c| {
                let (lat, lon) = self.cell_center(r, c);
                (lat, lon, self.value(r, c))
            })
        })
    }
}

/// Distance below which a cell takes a site's value verbatim, km.
const EXACT_HIT_KM: f64 = 1e-3;

/// Inverse-distance-weighted value at one point (weights `d^-power`).
pub fn idw_at(sites: &[SitePoint], lat: f64, lon: f64, power: f64) -> f64 {
    if let [only] = sites {
        return only.value;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for s in sites {
        let d = haversine_km(lat, lon, s.lat, s.lon);
        if d < EXACT_HIT_KM {
            return s.value;
        }
        let w = d.powf(-power);
        num += w * s.value;
        den += w;
    }
    num / den
}

/// IDW field over `bbox` with square cells of `cell_deg` degrees.
pub fn idw_grid(sites: &[SitePoint], bbox: BoundingBox, cell_deg: f64, power: f64) -> Result<GridField> {
    if sites.is_empty() {
        return Err(Error::insufficient("IDW needs at least one site"));
    }
    if !(cell_deg > 0.0) || !(bbox.lat_max > bbox.lat_min) || !(bbox.lon_max > bbox.lon_min) {
        return Err(Error::InvalidConfig("grid needs a positive cell size and a non-empty box".into()));
    }
    let rows = ((bbox.lat_max - bbox.lat_min) / cell_deg).ceil().max(1.0) as usize;
    let cols = ((bbox.lon_max - bbox.lon_min) / cell_deg).ceil().max(1.0) as usize;
    let mut field = GridField { bbox, cell_deg, rows, cols, values: Vec::with_capacity(rows * cols) };
    for r in 0..rows {
        for c in 0..cols {
            let (lat, lon) = field.cell_center(r, c);
            field.values.push(idw_at(sites, lat, lon, power));
        }
    }
    Ok(field)
}
