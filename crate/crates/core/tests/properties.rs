// SPDX-License-Identifier: Apache-2.0

use o3net::alarm::{AlarmLedger, Breaches, TestKind, Thresholds};
use o3net::distribution::{ks_pvalue, ks_statistic};
use o3net::metrics::{idw_at, metrics_from_pairs, SitePoint};
use o3net::moment::{
    decompose, mean, mv_from_samples, sample_variance, CalibrationEstimate, EstimateHistory, EstimateSource,
};
use o3net::proxy::{nearest_reference, network_median_series, Role, SiteRecord};
use o3net::{Hour, HourRange, TimeSeries};
use proptest::prelude::*;

fn sample(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..100.0f64, 2..max_len)
}

/// Sample with enough spread that moment matching is well defined.
fn spread_sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..150.0f64, 8..80).prop_filter("spread", |v| sample_variance(v) > 1.0)
}

fn site(id: String, role: Role, lat: f64, lon: f64) -> SiteRecord {
    SiteRecord { id, name: String::new(), role, lat, lon, elevation_m: None, aadt_5km: None, land_use: None }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ks_is_symmetric_and_bounded(a in sample(30), b in sample(30)) {
        let d = ks_statistic(&a, &b).unwrap();
        prop_assert_eq!(d, ks_statistic(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn ks_ignores_monotone_transforms(a in sample(30), b in sample(30)) {
        let f = |x: &f64| x * x * x + 3.0 * x - 7.0;
        let ta: Vec<f64> = a.iter().map(f).collect();
        let tb: Vec<f64> = b.iter().map(f).collect();
        prop_assert_eq!(ks_statistic(&a, &b).unwrap(), ks_statistic(&ta, &tb).unwrap());
    }

    #[test]
    fn ks_of_identical_samples_is_zero(a in sample(40)) {
        prop_assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn pvalue_decreases_with_d(d1 in 0.0..1.0f64, d2 in 0.0..1.0f64, m in 2usize..200, n in 2usize..200) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let (p_lo, p_hi) = (ks_pvalue(lo, m, n), ks_pvalue(hi, m, n));
        prop_assert!((0.0..=1.0).contains(&p_lo) && (0.0..=1.0).contains(&p_hi));
        prop_assert!(p_hi <= p_lo + 1e-12);
    }

    #[test]
    fn correction_matches_proxy_moments(y in spread_sample(), z in spread_sample()) {
        let est = mv_from_samples(Hour(0), &y, &z).unwrap();
        let x: Vec<f64> = y.iter().map(|&v| est.apply(v)).collect();
        prop_assert!((mean(&x) - mean(&z)).abs() <= 1e-9 * (1.0 + mean(&z).abs()));
        prop_assert!((sample_variance(&x) - sample_variance(&z)).abs() <= 1e-9 * sample_variance(&z));
    }

    #[test]
    fn gain_ignores_sensor_shift_and_inverts_scale(
        y in spread_sample(), z in spread_sample(), c in -100.0..100.0f64, k in 0.1..10.0f64,
    ) {
        let base = mv_from_samples(Hour(0), &y, &z).unwrap().a1;
        let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
        let scaled: Vec<f64> = y.iter().map(|v| v * k).collect();
        let a1_shift = mv_from_samples(Hour(0), &shifted, &z).unwrap().a1;
        let a1_scale = mv_from_samples(Hour(0), &scaled, &z).unwrap().a1;
        prop_assert!((a1_shift - base).abs() <= 1e-9 * base);
        prop_assert!((a1_scale - base / k).abs() <= 1e-9 * base / k);
    }

    #[test]
    fn trend_plus_residual_is_raw(vals in prop::collection::vec((-10.0..10.0f64, 0.3..3.0f64), 1..60), step in 1i64..5) {
        let mut h = EstimateHistory::new("S", Hour(0));
        for (i, &(a0, a1)) in vals.iter().enumerate() {
            h.push(CalibrationEstimate { hour: Hour(i as i64 * step), a0, a1, source: EstimateSource::Raw }).unwrap();
        }
        for (d, e) in decompose(&h).iter().zip(h.raw()) {
            prop_assert!((d.trend_a0 + d.residual_a0 - e.a0).abs() < 1e-9);
            prop_assert!((d.trend_a1 + d.residual_a1 - e.a1).abs() < 1e-9);
        }
    }

    #[test]
    fn short_episodes_never_latch(pattern in prop::collection::vec(prop::option::weighted(0.8, prop::bool::weighted(0.9)), 1..600)) {
        let th = Thresholds::default();
        let mut ledger = AlarmLedger::new("S");
        let mut run = 0u32;
        for (i, &flag) in pattern.iter().enumerate() {
            let flags = Breaches { ks: flag, a0: flag, a1: flag };
            ledger.update_persistence(Hour(i as i64), flags, &th).unwrap();
            match flag {
                Some(true) => run += 1,
                Some(false) => run = 0,
                None => {}
            }
            prop_assert_eq!(ledger.latched(TestKind::Ks), run > th.tf_hours);
        }
    }

    #[test]
    fn nearest_ignores_network_order(
        refs in prop::collection::vec((33.0..35.0f64, -119.0..-117.0f64), 1..12),
        seed in any::<u64>(),
    ) {
        let network: Vec<SiteRecord> =
            refs.iter().enumerate().map(|(i, &(la, lo))| site(format!("R{i:02}"), Role::Reference, la, lo)).collect();
        let test = site("S".into(), Role::LowCost, 34.0, -118.0);
        let mut shuffled = network.clone();
        let n = shuffled.len();
        for i in 0..n {
            shuffled.swap(i, (seed.wrapping_mul(i as u64 + 1) % n as u64) as usize);
        }
        prop_assert_eq!(
            nearest_reference(&test, &network).unwrap().proxy_site_id,
            nearest_reference(&test, &shuffled).unwrap().proxy_site_id
        );
    }

    #[test]
    fn median_lies_within_reporters(rows in prop::collection::vec(prop::collection::vec(prop::option::of(0.0..100.0f64), 24), 3..7)) {
        let series: Vec<TimeSeries> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| TimeSeries::from_hourly(format!("R{i}"), Hour(0), r.iter().copied()).unwrap())
            .collect();
        let refs: Vec<&TimeSeries> = series.iter().collect();
        let med = network_median_series(&refs, HourRange::new(Hour(0), Hour(23)), None, "m").unwrap();
        for o in med.observations() {
            let vals: Vec<f64> = series.iter().filter_map(|s| s.get(o.hour)).collect();
            prop_assert!(vals.len() >= 3);
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= o.value && o.value <= hi);
        }
    }

    #[test]
    fn idw_is_bounded_by_site_values(
        pts in prop::collection::vec((33.0..35.0f64, -119.0..-117.0f64, 0.0..100.0f64), 1..10),
        lat in 32.5..35.5f64,
        lon in -119.5..-116.5f64,
    ) {
        let sites: Vec<SitePoint> = pts
            .iter()
            .enumerate()
            .map(|(i, &(lat, lon, value))| SitePoint { id: i.to_string(), lat, lon, value })
            .collect();
        let v = idw_at(&sites, lat, lon, 2.0);
        let lo = pts.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-9 <= v && v <= hi + 1e-9);
    }

    #[test]
    fn pair_metrics_are_symmetric(pairs in prop::collection::vec((0.0..100.0f64, 0.0..100.0f64), 2..100)) {
        let swapped: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| (b, a)).collect();
        let (m, s) = (metrics_from_pairs(&pairs).unwrap(), metrics_from_pairs(&swapped).unwrap());
        prop_assert!((m.mab - s.mab).abs() < 1e-12);
        prop_assert!((m.rmsd - s.rmsd).abs() < 1e-12);
        match (m.r2, s.r2) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
        prop_assert!(m.mab <= m.rmsd + 1e-12);
    }
}
