// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use o3net::metrics::BoundingBox;
use o3net::Hour;
use o3net_cli::commands::{self, MapOptions, ScenarioSource};
use o3net_cli::config::{ThresholdOverrides, OUTPUT_DIR_ENV};
use o3net_cli::CliError;

#[derive(Parser)]
#[command(name = "o3net", version, about = "Drift detection and correction for low-cost sensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ThresholdArgs {
    /// Rolling window length, hours.
    #[arg(long)]
    td_hours: Option<u32>,
    /// Breach duration that latches an alarm, hours.
    #[arg(long)]
    tf_hours: Option<u32>,
    /// Latched alarms needed before correcting.
    #[arg(long)]
    alarm_count: Option<u32>,
    /// Minimum window completeness in [0, 1].
    #[arg(long)]
    completeness_min: Option<f64>,
}

impl From<ThresholdArgs> for ThresholdOverrides {
    fn from(a: ThresholdArgs) -> Self {
        ThresholdOverrides {
            td_hours: a.td_hours,
            tf_hours: a.tf_hours,
            alarm_count: a.alarm_count,
            completeness_min: a.completeness_min,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check series files and print per-site coverage.
    Validate {
        /// Network config naming the series files.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Additional series CSV files.
        files: Vec<PathBuf>,
    },
    /// Monitor and correct every low-cost site.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Compare proxy strategies at the reference sites.
    ProxyEval {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Generate a synthetic network with ground truth.
    Simulate {
        /// Scenario TOML file.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        scenario: Option<PathBuf>,
        /// Built-in scenario: null, drift, terrain, shifted-pair, twin-pair.
        #[arg(long)]
        preset: Option<String>,
        /// Seed for a preset.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: PathBuf,
    },
    /// Interpolated concentration maps at one hour.
    Map {
        #[arg(long)]
        config: PathBuf,
        /// Hour to map, `YYYY-MM-DDTHH:00:00Z`.
        #[arg(long)]
        hour: Hour,
        /// `lat_min,lat_max,lon_min,lon_max`; defaults to the sites plus a margin.
        #[arg(long, value_parser = parse_bbox)]
        bbox: Option<BoundingBox>,
        /// Cell size, degrees.
        #[arg(long, default_value_t = 0.01)]
        cell: f64,
        /// Inverse-distance power.
        #[arg(long, default_value_t = 2.0)]
        power: f64,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
}

fn parse_bbox(s: &str) -> Result<BoundingBox, String> {
    let v: Vec<f64> =
        s.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    match v[..] {
        [lat_min, lat_max, lon_min, lon_max] if lat_min < lat_max && lon_min < lon_max => {
            Ok(BoundingBox { lat_min, lat_max, lon_min, lon_max })
        }
        _ => Err("expected lat_min,lat_max,lon_min,lon_max with min < max".into()),
    }
}

fn dispatch(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Validate { config, files } => commands::validate(config.as_deref(), &files),
        Command::Run { config, thresholds, output_dir } => {
            commands::run(&config, &thresholds.into(), output_dir.as_deref())
        }
        Command::ProxyEval { config, thresholds, output_dir } => {
            commands::proxy_eval(&config, &thresholds.into(), output_dir.as_deref())
        }
        Command::Simulate { scenario, preset, seed, output_dir } => {
            let source = match (&scenario, &preset) {
                (Some(path), _) => ScenarioSource::File(path),
                (None, Some(name)) => ScenarioSource::Preset { name, seed },
                (None, None) => return Err(CliError::input("give --scenario or --preset")),
            };
            commands::simulate(&source, &output_dir)
        }
        Command::Map { config, hour, bbox, cell, power, thresholds, output_dir } => {
            let opts = MapOptions { hour, bbox, cell_deg: cell, power };
            commands::map(&config, &thresholds.into(), &opts, output_dir.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
