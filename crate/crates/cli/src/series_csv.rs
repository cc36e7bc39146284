// SPDX-License-Identifier: Apache-2.0

//! Series files: CSV with header `timestamp,site_id,value_ppb`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use o3net::{Hour, Observation, TimeSeries};

use crate::error::{CliError, CliResult};

pub const HEADER: [&str; 3] = ["timestamp", "site_id", "value_ppb"];

/// Plausible range for an hourly ozone value, ppb. Values outside are
/// reported as warnings by `validate`.
pub const PLAUSIBLE_PPB: (f64, f64) = (-10.0, 500.0);

/// A problem at a specific place in an input file. Line and column are 1-based.
#[derive(Clone, Debug, PartialEq)]
pub struct Issue {
    pub file: PathBuf,
    pub line: u64,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file.display(), self.line)?;
        if let Some(c) = self.column {
            write!(f, ":{c}")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// Everything read from a set of series files.
#[derive(Debug, Default)]
pub struct Scan {
    pub series: BTreeMap<String, TimeSeries>,
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl Scan {
    pub fn into_result(self) -> CliResult<BTreeMap<String, TimeSeries>> {
        if self.errors.is_empty() {
            Ok(self.series)
        } else {
            let lines: Vec<String> = self.errors.iter().map(Issue::to_string).collect();
            Err(CliError::input(lines.join("\n")))
        }
    }
}

struct Row {
    hour: Hour,
    value: f64,
    file: usize,
    line: u64,
}

/// Reads and checks every file, collecting all problems rather than stopping
/// at the first.
pub fn scan_files(paths: &[PathBuf]) -> Scan {
    let mut scan = Scan::default();
    let mut rows: BTreeMap<String, Vec<Row>> = BTreeMap::new();
    for (fi, path) in paths.iter().enumerate() {
        read_one(path, fi, &mut rows, &mut scan);
    }
    for (site, mut site_rows) in rows {
        site_rows.sort_by_key(|r| (r.hour, r.file, r.line));
        let mut obs = Vec::with_capacity(site_rows.len());
        for pair in site_rows.windows(2) {
            if pair[0].hour == pair[1].hour {
                let (a, b) = (&pair[0], &pair[1]);
                scan.errors.push(Issue {
                    file: paths[b.file].clone(),
                    line: b.line,
                    column: None,
                    message: format!("duplicate ({site}, {}): also at {}:{}", b.hour, paths[a.file].display(), a.line),
                });
            }
        }
        site_rows.dedup_by_key(|r| r.hour);
        obs.extend(site_rows.iter().map(|r| Observation::new(r.hour, r.value)));
        match TimeSeries::new(site.clone(), obs) {
            Ok(s) => {
                scan.series.insert(site, s);
            }
            Err(e) => scan.errors.push(Issue { file: PathBuf::new(), line: 0, column: None, message: e.to_string() }),
        }
    }
    scan
}

fn read_one(path: &Path, fi: usize, rows: &mut BTreeMap<String, Vec<Row>>, scan: &mut Scan) {
    let issue =
        |line: u64, column: Option<usize>, message: String| Issue { file: path.to_path_buf(), line, column, message };
    let mut reader = match csv::ReaderBuilder::new().has_headers(false).flexible(true).from_path(path) {
        Ok(r) => r,
        Err(e) => {
            scan.errors.push(issue(0, None, format!("cannot read: {e}")));
            return;
        }
    };
    let mut records = reader.records();
    match records.next() {
        Some(Ok(h)) if h.iter().map(str::trim).eq(HEADER) => {}
        Some(Ok(h)) => {
            scan.errors.push(issue(
                1,
                None,
                format!("header must be {:?}, found {:?}", HEADER.join(","), h.iter().collect::<Vec<_>>().join(",")),
            ));
            return;
        }
        Some(Err(e)) => {
            scan.errors.push(issue(1, None, e.to_string()));
            return;
        }
        None => {
            scan.errors.push(issue(1, None, "empty file".into()));
            return;
        }
    }
    for rec in records {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                scan.errors.push(issue(line, None, e.to_string()));
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            scan.errors.push(issue(line, None, format!("expected 3 fields, found {}", rec.len())));
            continue;
        }
        let hour = match Hour::parse_iso(rec[0].trim()) {
            Ok(h) => h,
            Err(e) => {
                scan.errors.push(issue(line, Some(1), e.to_string()));
                continue;
            }
        };
        let site = rec[1].trim();
        if site.is_empty() {
            scan.errors.push(issue(line, Some(2), "empty site_id".into()));
            continue;
        }
        let value = match rec[2].trim().parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                scan.errors.push(issue(line, Some(3), format!("value {:?} is not a finite number", &rec[2])));
                continue;
            }
        };
        if !(PLAUSIBLE_PPB.0..=PLAUSIBLE_PPB.1).contains(&value) {
            scan.warnings.push(issue(line, Some(3), format!("value {value} outside {:?} ppb", PLAUSIBLE_PPB)));
        }
        rows.entry(site.to_string()).or_default().push(Row { hour, value, file: fi, line });
    }
}

/// Reads series files, failing with every problem found.
pub fn read_series(paths: &[PathBuf]) -> CliResult<BTreeMap<String, TimeSeries>> {
    scan_files(paths).into_result()
}

/// Writes series sorted by `(site_id, timestamp)`.
pub fn write_series<'a>(path: &Path, series: impl IntoIterator<Item = &'a TimeSeries>) -> CliResult<()> {
    let mut all: Vec<&TimeSeries> = series.into_iter().collect();
    all.sort_by(|a, b| a.site_id().cmp(b.site_id()));
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::write(path, e))?;
    w.write_record(HEADER).map_err(|e| CliError::write(path, e))?;
    for s in all {
        for o in s.observations() {
            w.write_record([o.hour.to_string(), s.site_id().to_string(), o.value.to_string()])
                .map_err(|e| CliError::write(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::write(path, e))
}

/// Formats an optional number as CSV text (empty when absent).
pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::write(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::write(path, e))
}

pub(crate) fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::write(path, e))
}
