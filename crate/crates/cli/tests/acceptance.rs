// SPDX-License-Identifier: Apache-2.0

//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use o3net::alarm::{AlarmLedger, Breaches, TestKind, Thresholds};
use o3net::distribution::{ks_pvalue, ks_statistic};
use o3net::metrics::{buddy_check, pair_metrics, BUDDY_TOLERANCE_PPB};
use o3net::moment::{mean, mv_estimate, sample_variance};
use o3net::simulator::{apply_sensor_model, presets, SensorModel, Stream};
use o3net::{Hour, TimeSeries};
use o3net_cli::commands::{self, ScenarioSource};
use o3net_cli::config::{NetworkConfig, ThresholdOverrides};
use o3net_cli::series_csv::read_series;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let t0 = Instant::now();
    let res = f();
    let el = t0.elapsed();
    match res {
        Ok(d) if el <= limit => Ok(format!("{d}; {:.2?}", el)),
        Ok(d) => Err(format!("{d}; took {:.2?}, limit {:.0?}", el, limit)),
        Err(d) => Err(d),
    }
}

// ---------------------------------------------------------------- helpers

/// `#{x_i < x} / (n+1)` by direct counting.
fn count_below(s: &[f64], x: f64) -> f64 {
    s.iter().filter(|&&v| v < x).count() as f64 / (s.len() + 1) as f64
}

fn count_at_or_below(s: &[f64], x: f64) -> f64 {
    s.iter().filter(|&&v| v <= x).count() as f64 / (s.len() + 1) as f64
}

/// Brute-force sup over every pooled breakpoint, from both sides.
fn brute_force_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut d: f64 = 0.0;
    for &x in a.iter().chain(b) {
        d = d.max((count_below(a, x) - count_below(b, x)).abs());
        d = d.max((count_at_or_below(a, x) - count_at_or_below(b, x)).abs());
    }
    d
}

fn random_sample(rng: &mut Stream, len: usize, integers: bool) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let v = 100.0 * rng.uniform();
            if integers {
                v.round()
            } else {
                v
            }
        })
        .collect()
}

fn tmp(name: &str) -> tempfile::TempDir {
    tempfile::Builder::new().prefix(name).tempdir().expect("temp dir")
}

/// Simulates a preset and runs the framework on it; returns the scenario dir.
fn simulate_and_run(preset: &str, seed: u64, dir: &Path) -> Result<(), String> {
    commands::simulate(&ScenarioSource::Preset { name: preset, seed }, dir).map_err(|e| e.to_string())?;
    commands::run(&dir.join("network.toml"), &ThresholdOverrides::default(), None).map_err(|e| e.to_string())?;
    Ok(())
}

/// `corrected/<site>.csv` as `(raw, output)` series.
fn read_corrected(path: &Path, site: &str) -> Result<(TimeSeries, TimeSeries), String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let (mut raw, mut out) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let h = Hour::parse_iso(&rec[0]).map_err(|e| e.to_string())?;
        raw.push(o3net::Observation::new(h, rec[1].parse().map_err(|_| "bad raw")?));
        out.push(o3net::Observation::new(h, rec[2].parse().map_err(|_| "bad output")?));
    }
    Ok((TimeSeries::new(site, raw).map_err(|e| e.to_string())?, TimeSeries::new(site, out).map_err(|e| e.to_string())?))
}

fn low_cost_ids(dir: &Path) -> Result<Vec<String>, String> {
    let cfg = NetworkConfig::load(&dir.join("network.toml")).map_err(|e| e.to_string())?;
    Ok(cfg.sites_with_role(o3net::proxy::Role::LowCost).map(|s| s.id.clone()).collect())
}

fn all_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

// --------------------------------------------------------------- criteria

fn c1_ks_oracle() -> Outcome {
    timed(Duration::from_secs(5), || {
        let mut rng = Stream::new(1, 0);
        for case in 0..1000 {
            let (m, n) = (2 + (rng.uniform() * 19.0) as usize, 2 + (rng.uniform() * 19.0) as usize);
            let ints = case % 2 == 0;
            let (a, b) = (random_sample(&mut rng, m, ints), random_sample(&mut rng, n, ints));
            let d = ks_statistic(&a, &b).map_err(|e| e.to_string())?;
            let oracle = brute_force_ks(&a, &b);
            if d != oracle {
                return Err(format!("case {case}: {d} != {oracle} for {a:?} vs {b:?}"));
            }
        }
        Ok("1000/1000 exact".into())
    })
}

fn c2_ecdf_pin() -> Outcome {
    let d = ks_statistic(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).map_err(|e| e.to_string())?;
    check(d == 0.75 && d != 1.0, format!("d = {d}"))
}

fn c3_ks_calibration() -> Outcome {
    let mut rng = Stream::new(3, 0);
    let draws = 10_000;
    let mut rejected = 0;
    for _ in 0..draws {
        let a: Vec<f64> = (0..72).map(|_| 40.0 + rng.gaussian(12.0)).collect();
        let b: Vec<f64> = (0..72).map(|_| 40.0 + rng.gaussian(12.0)).collect();
        let d = ks_statistic(&a, &b).map_err(|e| e.to_string())?;
        if ks_pvalue(d, 72, 72) < 0.05 {
            rejected += 1;
        }
    }
    let rate = rejected as f64 / draws as f64;
    check((0.03..=0.07).contains(&rate), format!("rate {rate:.4} over {draws} draws"))
}

fn c4_moment_exactness() -> Outcome {
    let mut rng = Stream::new(4, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (a0, a1) = (-20.0 + 40.0 * rng.uniform(), 0.3 + 2.5 * rng.uniform());
        let z: Vec<f64> = (0..72).map(|_| 40.0 + rng.gaussian(15.0)).collect();
        let y: Vec<f64> = (0..72).map(|_| (35.0 + rng.gaussian(10.0) - a0) / a1).collect();
        let zs = TimeSeries::from_hourly("Z", Hour(0), z.iter().map(|&v| Some(v))).unwrap();
        let ys = TimeSeries::from_hourly("Y", Hour(0), y.iter().map(|&v| Some(v))).unwrap();
        let est = mv_estimate(&ys.window(Hour(71), 72), &zs.window(Hour(71), 72), 0.75).map_err(|e| e.to_string())?;
        let x: Vec<f64> = y.iter().map(|&v| est.apply(v)).collect();
        worst = worst.max((mean(&x) - mean(&z)).abs()).max((sample_variance(&x) - sample_variance(&z)).abs());
    }
    check(worst <= 1e-9, format!("max moment error {worst:.2e} over 100 windows"))
}

fn c5_affine_recovery() -> Outcome {
    let out = o3net::simulator::run_scenario(&presets::twin_pair(5)).map_err(|e| e.to_string())?;
    let x = out.truth_of("P").unwrap();
    let model = SensorModel { a0: 10.0, a1: 2.0, noise_sigma: 0.0, drift: Vec::new() };
    let y =
        apply_sensor_model(x, &model, x.first_hour().unwrap(), &mut Stream::new(0, 0)).map_err(|e| e.to_string())?;
    let end = x.first_hour().unwrap().offset(500);
    let est = mv_estimate(&y.window(end, 72), &x.window(end, 72), 0.75).map_err(|e| e.to_string())?;
    let worst =
        y.observations().iter().map(|o| (est.apply(o.value) - x.get(o.hour).unwrap()).abs()).fold(0.0_f64, f64::max);
    check(
        (est.a0 - 10.0).abs() <= 1e-9 && (est.a1 - 2.0).abs() <= 1e-9 && worst <= 1e-9,
        format!("a0 = {}, a1 = {}, max |x_hat - x| = {worst:.2e}", est.a0, est.a1),
    )
}

fn c6_persistence() -> Outcome {
    let th = Thresholds::default();
    let tf = th.tf_hours as usize;
    // clean lead-in, an episode of `len` breached hours with missing-data hours
    // scattered through it, then a clean hour
    let strategy = (0usize..50, 0usize..2, prop::collection::vec(0usize..40, 0..10));
    let mut runner = TestRunner::new(Config { cases: 2000, failure_persistence: None, ..Config::default() });
    let result = runner.run(&strategy, |(lead, extra, gaps)| {
        let len = tf + extra;
        let mut flags: Vec<Option<bool>> = vec![Some(false); lead];
        let mut episode: Vec<Option<bool>> = vec![Some(true); len];
        for (k, g) in gaps.iter().enumerate() {
            let at = (g * 7 + k) % (len + 1);
            episode.insert(at.max(1).min(episode.len()), None);
        }
        flags.extend(episode);
        flags.push(Some(false));
        let mut ledger = AlarmLedger::new("S");
        let mut ever = false;
        for (i, &f) in flags.iter().enumerate() {
            ledger.update_persistence(Hour(i as i64), Breaches { ks: f, a0: f, a1: f }, &th).unwrap();
            ever |= ledger.latched(TestKind::A1);
        }
        prop_assert_eq!(ever, len > tf, "episode of {} breached hours", len);
        Ok(())
    });
    match result {
        Ok(()) => Ok(format!("2000 randomized episodes of {tf} and {} hours", tf + 1)),
        Err(e) => Err(e.to_string()),
    }
}

fn c7_drift_correction() -> Outcome {
    timed(Duration::from_secs(60), || {
        let dir = tmp("drift");
        simulate_and_run("drift", 1, dir.path())?;
        let truth = read_series(&[dir.path().join("truth.csv")]).map_err(|e| e.to_string())?;
        let drifting: Vec<String> = presets::DRIFT_SITES.iter().map(|&i| presets::low_cost_id(i)).collect();
        let mut lines = Vec::new();
        let mut ok = true;
        let mut uncorrected = Vec::new();
        for id in low_cost_ids(dir.path())? {
            let (raw, out) = read_corrected(&dir.path().join("out/corrected").join(format!("{id}.csv")), &id)?;
            let t = &truth[&id];
            let raw_mab = pair_metrics(&raw, t, None).map_err(|e| e.to_string())?.mab;
            let out_mab = pair_metrics(&out, t, None).map_err(|e| e.to_string())?.mab;
            if drifting.contains(&id) {
                ok &= out_mab < raw_mab;
                uncorrected.push(raw_mab);
                lines.push(format!("{id} {raw_mab:.1}->{out_mab:.1}"));
            }
            ok &= out_mab <= 8.0;
            if out_mab > 8.0 {
                lines.push(format!("{id} corrected {out_mab:.1} > 8"));
            }
        }
        let (lo, hi) = uncorrected.iter().fold((f64::INFINITY, 0.0_f64), |(l, h), &v| (l.min(v), h.max(v)));
        lines.push(format!("uncorrected drifting band {lo:.1}-{hi:.1} ppb"));
        check(ok, lines.join(", "))
    })
}

fn c8_null_passthrough() -> Outcome {
    let dir = tmp("null");
    simulate_and_run("null", 2, dir.path())?;
    let summary = std::fs::read_to_string(dir.path().join("out/summary.csv")).map_err(|e| e.to_string())?;
    let mut sites = 0;
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[8] != "0.0" || f[9] != "ok" {
            return Err(format!("site {} corrected {}% ({})", f[0], f[8], f[9]));
        }
        sites += 1;
    }
    for id in low_cost_ids(dir.path())? {
        let (raw, out) = read_corrected(&dir.path().join("out/corrected").join(format!("{id}.csv")), &id)?;
        if raw != out {
            return Err(format!("{id}: output differs from raw"));
        }
    }
    check(sites == 20, format!("{sites} sites, correction 0%, output identical to raw"))
}

fn c9_proxy_ranking() -> Outcome {
    let dir = tmp("terrain");
    commands::simulate(&ScenarioSource::Preset { name: "terrain", seed: 1 }, dir.path()).map_err(|e| e.to_string())?;
    commands::proxy_eval(&dir.path().join("network.toml"), &ThresholdOverrides::default(), None)
        .map_err(|e| e.to_string())?;
    let mut rdr = csv::Reader::from_path(dir.path().join("out/proxy_scores.csv")).map_err(|e| e.to_string())?;
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let e = sums.entry(rec[1].to_string()).or_default();
        e.0 += rec[7].parse::<f64>().map_err(|_| "bad mab")?;
        e.1 += 1;
    }
    let means: BTreeMap<String, f64> = sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    let nearest = *means.get("nearest").ok_or("nearest missing")?;
    let ok = means.len() == 3 && means.values().all(|&m| nearest <= m);
    check(ok, format!("mean MAB {means:.3?}"))
}

fn c10_buddy() -> Outcome {
    let base: Vec<Option<f64>> =
        (0..96).map(|i| Some(40.0 + 15.0 * (i as f64 / 24.0 * std::f64::consts::TAU).sin())).collect();
    let buddy = TimeSeries::from_hourly("B", Hour(0), base.iter().copied()).unwrap();
    let shifted = TimeSeries::from_hourly("L", Hour(0), base.iter().map(|v| v.map(|x| x + 12.0))).unwrap();
    let same = buddy_check(&buddy, &buddy, BUDDY_TOLERANCE_PPB).map_err(|e| e.to_string())?;
    let off = buddy_check(&buddy, &shifted, BUDDY_TOLERANCE_PPB).map_err(|e| e.to_string())?;
    check(same.pass && !off.pass, format!("identical pass={}, +12 ppb pass={}", same.pass, off.pass))
}

fn c11_threshold_constants() -> Outcome {
    let th = Thresholds::default();
    let exact = th.p_ks_min == 0.05
        && (th.a1_low, th.a1_high) == (0.7, 1.3)
        && (th.a0_low, th.a0_high) == (-5.0, 5.0)
        && (th.td_hours, th.tf_hours) == (72, 120);
    let dir = tmp("cfg");
    commands::simulate(&ScenarioSource::Preset { name: "twin-pair", seed: 1 }, dir.path())
        .map_err(|e| e.to_string())?;
    let cfg = NetworkConfig::load(&dir.path().join("network.toml")).map_err(|e| e.to_string())?;
    let back = NetworkConfig::from_toml(&cfg.to_toml().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    check(exact && cfg.monitor.thresholds == th && back.monitor.thresholds == th, format!("{th:?}"))
}

fn c12_determinism() -> Outcome {
    let (a, b) = (tmp("det-a"), tmp("det-b"));
    simulate_and_run("drift", 9, a.path())?;
    simulate_and_run("drift", 9, b.path())?;
    let (fa, fb) = (all_files(a.path()), all_files(b.path()));
    if fa.keys().ne(fb.keys()) {
        return Err("different file sets".into());
    }
    match fa.iter().find(|(k, v)| fb[*k] != **v) {
        Some((k, _)) => Err(format!("{} differs", k.display())),
        None => Ok(format!("{} files byte-identical", fa.len())),
    }
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("KS oracle equivalence", c1_ks_oracle),
        ("ECDF normalization pin", c2_ecdf_pin),
        ("KS false-alarm calibration", c3_ks_calibration),
        ("moment-matching exactness", c4_moment_exactness),
        ("affine recovery", c5_affine_recovery),
        ("alarm persistence", c6_persistence),
        ("end-to-end drift correction", c7_drift_correction),
        ("null-scenario non-interference", c8_null_passthrough),
        ("proxy ranking", c9_proxy_ranking),
        ("buddy check", c10_buddy),
        ("indicative-bound constants", c11_threshold_constants),
        ("determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS criterion {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
