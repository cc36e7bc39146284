// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

fn o3net(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_o3net")).args(args).env_remove("O3NET_OUTPUT_DIR").output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn validate_accepts_well_formed_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "ok.csv",
        "timestamp,site_id,value_ppb\n2018-01-01T00:00:00Z,A,30\n2018-01-01T02:00:00Z,A,31.5\n",
    );
    let o = o3net(&["validate", &f]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("coverage"));
    assert!(table.contains("66.7%"), "{table}");
}

#[test]
fn validate_reports_duplicates_with_both_lines() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "dup.csv",
        "timestamp,site_id,value_ppb\n2018-01-01T00:00:00Z,A,30\n2018-01-01T01:00:00Z,A,31\n2018-01-01T00:00:00Z,A,32\n",
    );
    let o = o3net(&["validate", &f]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("dup.csv:4") && err.contains("dup.csv:2"), "{err}");
}

#[test]
fn validate_rejects_non_utc_and_names_the_cell() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "tz.csv", "timestamp,site_id,value_ppb\n2018-01-01T00:00:00-08:00,A,30\n");
    let o = o3net(&["validate", &f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tz.csv:2:1"), "{}", stderr(&o));
    let g = write(dir.path(), "num.csv", "timestamp,site_id,value_ppb\n2018-01-01T00:00:00Z,A,abc\n");
    assert!(stderr(&o3net(&["validate", &g])).contains("num.csv:2:3"));
}

#[test]
fn simulate_validate_run_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert_eq!(o3net(&["simulate", "--preset", "shifted-pair", "--output-dir", path(&sim)]).status.code(), Some(0));
    let cfg = sim.join("network.toml");
    let v = o3net(&["validate", "--config", path(&cfg)]);
    assert_eq!(v.status.code(), Some(0), "{}", stderr(&v));
    // shifted pair has two references and no low-cost sites
    assert_eq!(o3net(&["run", "--config", path(&cfg)]).status.code(), Some(1));

    let net = dir.path().join("net");
    o3net(&["simulate", "--preset", "null", "--output-dir", path(&net)]);
    let out = dir.path().join("elsewhere");
    let r = Command::new(env!("CARGO_BIN_EXE_o3net"))
        .args(["run", "--config", path(&net.join("network.toml")), "--td-hours", "48", "--alarm-count", "2"])
        .env("O3NET_OUTPUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    assert!(out.join("summary.csv").exists());
    assert!(out.join("charts/LC01.csv").exists());
    assert!(!net.join("out").exists());
    let chart = std::fs::read_to_string(out.join("charts/LC01.csv")).unwrap();
    assert!(chart.starts_with("timestamp,p_ks,a0_raw,a1_raw,a0_trend,a1_trend,breach_ks,breach_a0,breach_a1,alarm_ks,alarm_a0,alarm_a1,corrected_flag,raw_value,output_value\n"));
}

#[test]
fn manifest_hash_tracks_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, args: &[&str]| {
        let out = dir.path().join(name);
        let mut a = vec!["simulate", "--output-dir", path(&out)];
        a.extend_from_slice(args);
        assert_eq!(o3net(&a).status.code(), Some(0));
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        (out, m["config_hash"].as_str().unwrap().to_string())
    };
    let (a, ha) = run("a", &["--preset", "twin-pair", "--seed", "3"]);
    let (b, hb) = run("b", &["--preset", "twin-pair", "--seed", "3"]);
    let (_, hc) = run("c", &["--preset", "twin-pair", "--seed", "4"]);
    assert_eq!(ha, hb);
    assert_ne!(ha, hc);
    for f in ["series.csv", "truth.csv", "manifest.json", "network.toml", "scenario.toml"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    // the written scenario reproduces itself
    let (_, hd) = run("d", &["--scenario", path(&a.join("scenario.toml"))]);
    assert_eq!(ha, hd);
}

#[test]
fn proxy_eval_emits_one_row_per_applicable_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    o3net(&["simulate", "--preset", "twin-pair", "--output-dir", path(&sim)]);
    let cfg = sim.join("network.toml");
    // drop the AADT of one site so similar-AADT cannot apply to the other
    let text = std::fs::read_to_string(&cfg).unwrap();
    let first = text.find("aadt_5km").unwrap();
    let line_end = first + text[first..].find('\n').unwrap() + 1;
    std::fs::write(&cfg, format!("{}{}", &text[..first], &text[line_end..])).unwrap();

    let o = o3net(&["proxy-eval", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let scores = std::fs::read_to_string(sim.join("out/proxy_scores.csv")).unwrap();
    let rows: Vec<&str> = scores.lines().skip(1).collect();
    // two sites x (nearest) + none for the median (one reporter) + none for AADT
    assert_eq!(rows.len(), 2, "{scores}\n{}", stdout(&o));
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("nearest")));
    assert!(stdout(&o).contains("absent"));
    assert!(sim.join("out/proxy_scores.svg").exists());
}

#[test]
fn map_with_one_site_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let series = write(dir.path(), "s.csv", "timestamp,site_id,value_ppb\n2018-01-01T00:00:00Z,R1,42\n");
    let cfg = write(
        dir.path(),
        "net.toml",
        &format!(
            "series = [{series:?}]\n[[sites]]\nid = \"R1\"\nrole = \"reference\"\nlat = 34.0\nlon = -118.0\n\n[[sites]]\nid = \"R2\"\nrole = \"reference\"\nlat = 34.2\nlon = -118.2\n"
        ),
    );
    let o = o3net(&["map", "--config", &cfg, "--hour", "2018-01-01T00:00:00Z", "--cell", "0.05"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let grid = std::fs::read_to_string(dir.path().join("out/map_network.csv")).unwrap();
    assert!(grid.lines().skip(1).all(|l| l.ends_with(",42")), "{grid}");
    assert!(dir.path().join("out/map_reference.svg").exists());

    let none = o3net(&["map", "--config", &cfg, "--hour", "2019-01-01T00:00:00Z"]);
    assert_eq!(none.status.code(), Some(1));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = write(dir.path(), "file", "");
    let o = o3net(&["simulate", "--preset", "twin-pair", "--output-dir", &blocker]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bad_thresholds_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    o3net(&["simulate", "--preset", "null", "--output-dir", path(&sim)]);
    let o = o3net(&["run", "--config", path(&sim.join("network.toml")), "--completeness-min", "1.5"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}
