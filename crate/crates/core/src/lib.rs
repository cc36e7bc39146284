// SPDX-License-Identifier: Apache-2.0

//! Drift detection and semi-blind calibration for low-cost air-quality
//! sensor networks anchored by a few reference analyzers.
//!
//! A low-cost sensor is checked hourly against a *proxy*: a trusted series
//! from elsewhere whose concentration distribution, averaged over a few
//! diurnal cycles, should match the sensor site's. Three control-chart tests
//! run on a rolling window:
//!
//! * a two-sample Kolmogorov-Smirnov test of sensor vs. proxy samples,
//! * the moment-matching gain `a1 = sqrt(var z / var y)`,
//! * the moment-matching offset `a0 = mean z - a1 mean y`.
//!
//! A test that stays outside its limits long enough latches an alarm, and an
//! alarmed sensor is corrected with `x = a0 + a1 y` using the long-term
//! trend of the estimates.
//!
//! ```
//! use o3net::alarm::{run_monitor, MonitorConfig};
//! use o3net::simulator::{presets, run_scenario};
//!
//! let out = run_scenario(&presets::twin_pair(7)).unwrap();
//! let (proxy, test) = (out.observed_of("P").unwrap(), out.observed_of("T").unwrap());
//! let run = run_monitor(test, proxy, None, &MonitorConfig::default()).unwrap();
//! assert_eq!(run.ledger.summary().corrected_fraction, 0.0);
//! ```
//!
//! Module map:
//!
//! * [`timeseries`]: hourly series, windows, alignment
//! * [`distribution`]: ECDF and KS test
//! * [`moment`]: moment matching, quadratic trend
//! * [`alarm`]: thresholds, persistence, the hourly monitor
//! * [`proxy`]: proxy selection and scoring
//! * [`metrics`]: MAB/R^2, buddy checks, IDW grids
//! * [`simulator`]: synthetic networks with ground truth

#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alarm;
pub mod distribution;
pub mod error;
pub mod metrics;
pub mod moment;
pub mod proxy;
pub mod simulator;
pub mod timeseries;

pub use error::{Error, Result};
pub use timeseries::{Hour, HourRange, Observation, TimeSeries, WindowSlice};
