// SPDX-License-Identifier: Apache-2.0

//! Network configuration file (TOML).

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use o3net::alarm::{MonitorConfig, Thresholds};
use o3net::proxy::{Role, SiteRecord, Strategy};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "O3NET_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxySettings {
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    /// Per-site explicit proxies, `test site -> proxy site`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, String>,
}

fn default_strategy() -> Strategy {
    Strategy::Nearest
}

impl Default for ProxySettings {
    fn default() -> Self {
        ProxySettings { strategy: Strategy::Nearest, overrides: BTreeMap::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Series CSV files, relative to the config file.
    pub series: Vec<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub proxy: ProxySettings,
    #[serde(default)]
    pub monitor: MonitorConfig,
    pub sites: Vec<SiteRecord>,
    /// Directory the config was loaded from; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl NetworkConfig {
    pub fn load(path: &Path) -> CliResult<NetworkConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
        let mut cfg =
            NetworkConfig::from_toml(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> CliResult<NetworkConfig> {
        let cfg: NetworkConfig = toml::from_str(text).map_err(|e| CliError::input(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::runtime(e.to_string()))
    }

    pub fn validate(&self) -> CliResult<()> {
        let mut seen = HashSet::new();
        for s in &self.sites {
            if !seen.insert(s.id.as_str()) {
                return Err(CliError::input(format!("duplicate site id {:?}", s.id)));
            }
            s.validate()?;
        }
        for (test, proxy) in &self.proxy.overrides {
            if !seen.contains(test.as_str()) || !seen.contains(proxy.as_str()) {
                return Err(CliError::input(format!("proxy override {test} -> {proxy} names an unknown site")));
            }
            if test == proxy {
                return Err(CliError::input(format!("site {test} cannot be its own proxy")));
            }
        }
        self.monitor.validate()?;
        Ok(())
    }

    pub fn series_paths(&self) -> Vec<PathBuf> {
        self.series.iter().map(|p| self.base_dir.join(p)).collect()
    }

    /// Output directory: `override_dir` (CLI flag or environment) wins over the file.
    pub fn output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        match override_dir {
            Some(d) => d.to_path_buf(),
            None => self.base_dir.join(&self.output_dir),
        }
    }

    pub fn site(&self, id: &str) -> Option<&SiteRecord> {
        self.sites.iter().find(|s| s.id == id)
    }

    pub fn sites_with_role(&self, role: Role) -> impl Iterator<Item = &SiteRecord> {
        self.sites.iter().filter(move |s| s.role == role)
    }
}

/// Command-line threshold overrides.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ThresholdOverrides {
    pub td_hours: Option<u32>,
    pub tf_hours: Option<u32>,
    pub alarm_count: Option<u32>,
    pub completeness_min: Option<f64>,
}

impl ThresholdOverrides {
    pub fn apply(&self, th: &mut Thresholds) {
        if let Some(v) = self.td_hours {
            th.td_hours = v;
        }
        if let Some(v) = self.tf_hours {
            th.tf_hours = v;
        }
        if let Some(v) = self.alarm_count {
            th.correction_alarm_count = v;
        }
        if let Some(v) = self.completeness_min {
            th.completeness_min = v;
        }
    }
}
