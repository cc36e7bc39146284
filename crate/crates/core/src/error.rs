// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::timeseries::Hour;

/// Errors produced by the framework.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Not enough samples (or not enough window completeness) to compute a statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Sensor window has zero variance (flat-lined sensor, blocked inlet).
    #[error("degenerate sensor window: variance {variance:e}")]
    DegenerateSensorWindow { variance: f64 },

    /// Proxy window has zero variance, so no positive gain can be estimated.
    #[error("degenerate proxy window: variance {variance:e}")]
    DegenerateProxyWindow { variance: f64 },

    #[error("observations out of order: {next} does not follow {last}")]
    OutOfOrder { last: Hour, next: Hour },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// No site in the network qualifies as a proxy for the requested strategy.
    #[error("no eligible proxy for site {site}: {reason}")]
    NoEligibleProxy { site: String, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn insufficient(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }
}
