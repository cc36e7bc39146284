// SPDX-License-Identifier: Apache-2.0

//! Ready-made scenarios used by the test suites and the `simulate --preset` command.

use super::{DriftMode, DriftSegment, ProxyRelation, Scenario, SensorModel, SiteSpec, Stream, TruthModel};
use crate::proxy::{Role, SiteRecord};
use crate::timeseries::Hour;

/// 2018-01-01T00:00:00Z.
pub const START: Hour = Hour(420_768);

/// Seven months of hourly data (212 days).
pub const SEVEN_MONTHS_HOURS: u32 = 212 * 24;

/// Hours in a 30-day month.
pub const MONTH_HOURS: u32 = 30 * 24;

const LAYOUT_SEED: u64 = 0x5EED_1A7E;

/// Names of the preset scenarios.
pub const NAMES: [&str; 5] = ["null", "drift", "terrain", "shifted-pair", "twin-pair"];

pub fn by_name(name: &str, seed: u64) -> Option<Scenario> {
    match name {
        "null" => Some(null_network(seed)),
        "drift" => Some(drift_network(seed)),
        "terrain" => Some(terrain_network(seed)),
        "shifted-pair" => Some(shifted_pair(seed)),
        "twin-pair" => Some(twin_pair(seed)),
        _ => None,
    }
}

fn record(id: String, role: Role, lat: f64, lon: f64, aadt: Option<f64>) -> SiteRecord {
    SiteRecord { name: id.clone(), id, role, lat, lon, elevation_m: None, aadt_5km: aadt, land_use: None }
}

// Mildly varying urban field over a ~45 km box: neighbouring sites have
// near-identical distributions.
const URBAN_LAT: (f64, f64) = (33.80, 34.20);
const URBAN_LON: (f64, f64) = (-118.45, -117.95);

fn urban_truth(lat: f64, lon: f64) -> TruthModel {
    let u = (lon - URBAN_LON.0) / (URBAN_LON.1 - URBAN_LON.0);
    let v = (lat - URBAN_LAT.0) / (URBAN_LAT.1 - URBAN_LAT.0);
    TruthModel {
        baseline: 29.0 + 2.0 * u + 1.0 * v,
        amplitude: 17.0 + 1.5 * u,
        phase_hours: 8.0,
        regional_weight: 1.0,
        noise_sigma: 3.0,
        derived_from: None,
    }
}

const URBAN_REFS: [(f64, f64); 5] =
    [(33.90, -118.35), (34.10, -118.35), (34.00, -118.20), (33.90, -118.05), (34.10, -118.05)];

/// Five reference analyzers and twenty healthy, factory-calibrated sensors.
pub fn null_network(seed: u64) -> Scenario {
    urban_network("null", seed, &[], &[])
}

/// As [`null_network`], with sensor response gain decaying to 0.5 over two
/// months from month two at five sites (effective `a1` ramping 1 -> 2), and
/// two sensors flat-lining for the last ten days.
pub fn drift_network(seed: u64) -> Scenario {
    urban_network("drift", seed, &[2, 6, 10, 14, 18], &[4, 12])
}

/// Indices (into the low-cost list) of drifting and flat-lining sensors in
/// [`drift_network`].
pub const DRIFT_SITES: [usize; 5] = [2, 6, 10, 14, 18];
pub const FLATLINE_SITES: [usize; 2] = [4, 12];

pub fn low_cost_id(i: usize) -> String {
    format!("LC{:02}", i + 1)
}

fn urban_network(name: &str, seed: u64, drifting: &[usize], flat: &[usize]) -> Scenario {
    let mut layout = Stream::new(LAYOUT_SEED, 0);
    let mut sites = Vec::new();
    for (k, &(lat, lon)) in URBAN_REFS.iter().enumerate() {
        sites.push(SiteSpec {
            site: record(format!("REF{}", k + 1), Role::Reference, lat, lon, None),
            truth: urban_truth(lat, lon),
            sensor: None,
        });
    }
    for i in 0..20 {
        let lat = URBAN_LAT.0 + layout.uniform() * (URBAN_LAT.1 - URBAN_LAT.0);
        let lon = URBAN_LON.0 + layout.uniform() * (URBAN_LON.1 - URBAN_LON.0);
        let a0 = -1.5 + 3.0 * layout.uniform();
        let a1 = 0.93 + 0.14 * layout.uniform();
        let mut drift = Vec::new();
        if drifting.contains(&i) {
            drift.push(DriftSegment {
                start_hour: 2 * MONTH_HOURS,
                end_hour: 4 * MONTH_HOURS,
                mode: DriftMode::GainRamp,
                target: 2.0,
            });
        }
        if flat.contains(&i) {
            drift.push(DriftSegment {
                start_hour: SEVEN_MONTHS_HOURS - 240,
                end_hour: SEVEN_MONTHS_HOURS,
                mode: DriftMode::Flatline,
                target: 0.0,
            });
        }
        sites.push(SiteSpec {
            site: record(low_cost_id(i), Role::LowCost, lat, lon, None),
            truth: urban_truth(lat, lon),
            sensor: Some(SensorModel { a0, a1, noise_sigma: 1.5, drift }),
        });
    }
    Scenario {
        name: name.into(),
        seed,
        start: START,
        duration_hours: SEVEN_MONTHS_HOURS,
        regional_step_sigma: 1.0,
        regional_bound: 15.0,
        reference_noise_sigma: 1.0,
        missing_fraction: 0.02,
        sites,
    }
}

// Valley with a strong west-east gradient: low baseline and wide diurnal
// swing near the coast, high baseline and narrow swing in the eastern basin.
const VALLEY_LAT: (f64, f64) = (33.95, 34.15);
const VALLEY_LON: (f64, f64) = (-117.55, -117.10);

fn valley_truth(lat: f64, lon: f64) -> TruthModel {
    let u = (lon - VALLEY_LON.0) / (VALLEY_LON.1 - VALLEY_LON.0);
    let v = (lat - VALLEY_LAT.0) / (VALLEY_LAT.1 - VALLEY_LAT.0);
    TruthModel {
        baseline: 20.0 + 14.0 * u + 2.0 * v,
        amplitude: 24.0 - 10.0 * u,
        phase_hours: 8.0 + u,
        regional_weight: 1.0,
        noise_sigma: 3.0,
        derived_from: None,
    }
}

/// AADT (vehicles/day) of the valley references, west to east. Sites with
/// similar traffic sit on opposite sides of the valley.
const VALLEY_AADT: [f64; 8] = [100e3, 140e3, 180e3, 220e3, 104e3, 146e3, 185e3, 214e3];

/// Eight references along a terrain gradient plus sixteen sensors, four of
/// which drift late in the run.
pub fn terrain_network(seed: u64) -> Scenario {
    let mut layout = Stream::new(LAYOUT_SEED, 1);
    let mut sites = Vec::new();
    for (k, &aadt) in VALLEY_AADT.iter().enumerate() {
        let lon = VALLEY_LON.0 + (VALLEY_LON.1 - VALLEY_LON.0) * k as f64 / 7.0;
        let lat = VALLEY_LAT.0 + (VALLEY_LAT.1 - VALLEY_LAT.0) * (0.3 + 0.4 * layout.uniform());
        sites.push(SiteSpec {
            site: record(format!("V{}", k + 1), Role::Reference, lat, lon, Some(aadt)),
            truth: valley_truth(lat, lon),
            sensor: None,
        });
    }
    for i in 0..16 {
        let lat = VALLEY_LAT.0 + layout.uniform() * (VALLEY_LAT.1 - VALLEY_LAT.0);
        let lon = VALLEY_LON.0 + layout.uniform() * (VALLEY_LON.1 - VALLEY_LON.0);
        let drift = if i % 4 == 1 {
            vec![DriftSegment {
                start_hour: 4 * MONTH_HOURS,
                end_hour: 6 * MONTH_HOURS,
                mode: DriftMode::GainRamp,
                target: 2.0,
            }]
        } else {
            vec![]
        };
        sites.push(SiteSpec {
            site: record(format!("S{:02}", i + 1), Role::LowCost, lat, lon, Some(150e3)),
            truth: valley_truth(lat, lon),
            sensor: Some(SensorModel { a0: 0.0, a1: 1.0, noise_sigma: 1.5, drift }),
        });
    }
    Scenario {
        name: "terrain".into(),
        seed,
        start: START,
        duration_hours: SEVEN_MONTHS_HOURS,
        regional_step_sigma: 1.0,
        regional_bound: 15.0,
        reference_noise_sigma: 1.0,
        missing_fraction: 0.02,
        sites,
    }
}

fn pair(name: &str, seed: u64, test_truth: TruthModel) -> Scenario {
    let base = TruthModel {
        baseline: 30.0,
        amplitude: 18.0,
        phase_hours: 8.0,
        regional_weight: 1.0,
        noise_sigma: 3.0,
        derived_from: None,
    };
    Scenario {
        name: name.into(),
        seed,
        start: START,
        duration_hours: 120 * 24,
        regional_step_sigma: 1.0,
        regional_bound: 15.0,
        reference_noise_sigma: 1.0,
        missing_fraction: 0.0,
        sites: vec![
            SiteSpec {
                site: record("P".into(), Role::Reference, 34.10, -117.27, Some(87e3)),
                truth: base,
                sensor: None,
            },
            SiteSpec {
                site: record("T".into(), Role::Reference, 34.06, -117.15, Some(92e3)),
                truth: test_truth,
                sensor: None,
            },
        ],
    }
}

/// Two references; the test site `T` sits higher and narrower than its
/// proxy `P` (`X_T = 15 + 0.7 X_P + e`).
pub fn shifted_pair(seed: u64) -> Scenario {
    let rel = ProxyRelation { site: "P".into(), b0: 15.0, b1: 0.7, sigma_e: 2.0 };
    pair(
        "shifted-pair",
        seed,
        TruthModel {
            baseline: 0.0,
            amplitude: 0.0,
            phase_hours: 0.0,
            regional_weight: 0.0,
            noise_sigma: 0.0,
            derived_from: Some(rel),
        },
    )
}

/// Two references whose truths are identical.
pub fn twin_pair(seed: u64) -> Scenario {
    let rel = ProxyRelation { site: "P".into(), b0: 0.0, b1: 1.0, sigma_e: 0.0 };
    pair(
        "twin-pair",
        seed,
        TruthModel {
            baseline: 0.0,
            amplitude: 0.0,
            phase_hours: 0.0,
            regional_weight: 0.0,
            noise_sigma: 0.0,
            derived_from: Some(rel),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_is_new_year_2018() {
        assert_eq!(START.to_string(), "2018-01-01T00:00:00Z");
    }

    #[test]
    fn presets_validate() {
        for name in NAMES {
            by_name(name, 1).unwrap().validate().unwrap();
        }
        assert!(by_name("nope", 1).is_none());
    }

    #[test]
    fn factory_calibration_within_indicative_bounds() {
        for s in drift_network(3).sites.iter().filter_map(|s| s.sensor.as_ref()) {
            assert!(s.a0.abs() < 5.0 && (s.a1 - 1.0).abs() < 0.3);
        }
    }
}
