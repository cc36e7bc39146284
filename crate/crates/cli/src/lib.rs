// SPDX-License-Identifier: Apache-2.0

//! File formats, configuration and subcommands for the `o3net` tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod series_csv;
pub mod svg;

pub use error::{CliError, CliResult};
