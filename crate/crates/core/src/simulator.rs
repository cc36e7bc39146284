// SPDX-License-Identifier: Apache-2.0

//! Synthetic hierarchical network with known ground truth.
//!
//! Truth at each site is a diurnal sinusoid plus a regional component shared
//! by all sites plus independent site noise, clipped at zero. A site may
//! instead be derived from another site's truth through a linear proxy
//! relation `X = b0 + b1 * X_src + e`. Reference sites report truth plus
//! small instrument noise. Low-cost sites report through an affine sensor
//! model that can drift over time.
//!
//! # Randomness
//!
//! Every stream is a xoshiro256++ generator seeded through SplitMix64 from
//! `seed XOR (stream * 0x9E3779B97F4A7C15)`. Uniform doubles take the top 53
//! bits of each output; normals use the cosine branch of Box-Muller, one
//! normal per pair of uniforms. Stream 0 drives the regional walk; site `i`
//! (in declaration order) owns stream `3i+1` (truth noise), `3i+2`
//! (instrument noise) and `3i+3` (missing hours).

use std::collections::HashMap;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proxy::{Role, SiteRecord};
use crate::timeseries::{Hour, Observation, TimeSeries};

pub mod presets;

/// Name recorded in scenario manifests.
pub const GENERATOR_NAME: &str = "xoshiro256++/splitmix64";

const STREAM_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

/// Deterministic normal/uniform source for one stream.
#[derive(Clone, Debug)]
pub struct Stream {
    rng: Xoshiro256PlusPlus,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Stream { rng: Xoshiro256PlusPlus::seed_from_u64(seed ^ stream.wrapping_mul(STREAM_MIX)) }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn gaussian(&mut self, sigma: f64) -> f64 {
        sigma * self.normal()
    }
}

/// Linear relation of a site's truth to another site's truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxyRelation {
    pub site: String,
    pub b0: f64,
    pub b1: f64,
    pub sigma_e: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthModel {
    pub baseline: f64,
    pub amplitude: f64,
    /// Hour of day at which the sinusoid crosses upward through the baseline.
    pub phase_hours: f64,
    #[serde(default = "one")]
    pub regional_weight: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived_from: Option<ProxyRelation>,
}

fn one() -> f64 {
    1.0
}

impl TruthModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self.amplitude >= 0.0
            && self.noise_sigma >= 0.0
            && [self.baseline, self.amplitude, self.phase_hours, self.regional_weight].iter().all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidConfig("truth model needs amplitude >= 0, sigma >= 0, finite values".into()));
        }
        if let Some(rel) = &self.derived_from {
            if !(rel.b1 > 0.0) || !(rel.sigma_e >= 0.0) || !rel.b0.is_finite() {
                return Err(Error::InvalidConfig("proxy relation needs b1 > 0, sigma_e >= 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftMode {
    /// Linear ramp of the effective gain `a1` to `target`.
    GainRamp,
    /// Linear ramp of the effective offset `a0` to `target`.
    OffsetRamp,
    /// Output frozen at its last value (blocked inlet).
    Flatline,
}

/// Drift over hours `[start_hour, end_hour)` counted from the scenario start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSegment {
    pub start_hour: u32,
    pub end_hour: u32,
    pub mode: DriftMode,
    #[serde(default)]
    pub target: f64,
}

/// Factory calibration `X = a0 + a1 Y + eps` and its drift schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorModel {
    #[serde(default)]
    pub a0: f64,
    #[serde(default = "one")]
    pub a1: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drift: Vec<DriftSegment>,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel { a0: 0.0, a1: 1.0, noise_sigma: 0.0, drift: Vec::new() }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.a1 > 0.0) || !(self.noise_sigma >= 0.0) || !self.a0.is_finite() {
            return Err(Error::InvalidConfig("sensor model needs a1 > 0 and noise_sigma >= 0".into()));
        }
        for seg in &self.drift {
            if seg.end_hour <= seg.start_hour {
                return Err(Error::InvalidConfig("drift segment must end after it starts".into()));
            }
            if seg.mode == DriftMode::GainRamp && !(seg.target > 0.0) {
                return Err(Error::InvalidConfig("gain ramp target must be positive".into()));
            }
        }
        Ok(())
    }

    /// Effective `(a0, a1)` at hour offset `i`.
    pub fn effective(&self, i: u32) -> (f64, f64) {
        let (mut a0, mut a1) = (self.a0, self.a1);
        for seg in &self.drift {
            let ramp = |from: f64| {
                if i < seg.start_hour {
                    from
                } else if i >= seg.end_hour {
                    seg.target
                } else {
                    let f = (i - seg.start_hour) as f64 / (seg.end_hour - seg.start_hour) as f64;
                    from + f * (seg.target - from)
                }
            };
            match seg.mode {
                DriftMode::GainRamp => a1 = ramp(a1),
                DriftMode::OffsetRamp => a0 = ramp(a0),
                DriftMode::Flatline => {}
            }
        }
        (a0, a1)
    }

    fn flatlined(&self, i: u32) -> bool {
        self.drift.iter().any(|s| s.mode == DriftMode::Flatline && s.start_hour <= i && i < s.end_hour)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSpec {
    pub site: SiteRecord,
    pub truth: TruthModel,
    /// Required for low-cost sites; ignored for reference sites.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor: Option<SensorModel>,
}

fn default_bound() -> f64 {
    15.0
}

fn default_step() -> f64 {
    1.0
}

fn default_ref_sigma() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub start: Hour,
    pub duration_hours: u32,
    /// Standard deviation of the regional walk's hourly step, ppb.
    #[serde(default = "default_step")]
    pub regional_step_sigma: f64,
    /// The regional walk reflects at `+-regional_bound`, ppb.
    #[serde(default = "default_bound")]
    pub regional_bound: f64,
    /// Instrument noise of reference analyzers, ppb.
    #[serde(default = "default_ref_sigma")]
    pub reference_noise_sigma: f64,
    /// Probability that any observed hour is missing.
    #[serde(default)]
    pub missing_fraction: f64,
    pub sites: Vec<SiteSpec>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashMap::new();
        for (i, s) in self.sites.iter().enumerate() {
            if ids.insert(s.site.id.as_str(), i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate site id {}", s.site.id)));
            }
            s.site.validate()?;
            s.truth.validate()?;
            match (&s.sensor, s.site.role) {
                (Some(m), _) => m.validate()?,
                (None, Role::LowCost) => {
                    return Err(Error::InvalidConfig(format!("low-cost site {} has no sensor model", s.site.id)))
                }
                (None, Role::Reference) => {}
            }
        }
        for s in &self.sites {
            if let Some(rel) = &s.truth.derived_from {
                if !ids.contains_key(rel.site.as_str()) || rel.site == s.site.id {
                    return Err(Error::InvalidConfig(format!(
                        "site {} derives from unknown site {}",
                        s.site.id, rel.site
                    )));
                }
            }
        }
        if !(0.0..1.0).contains(&self.missing_fraction) {
            return Err(Error::InvalidConfig("missing_fraction must lie in [0, 1)".into()));
        }
        if !(self.regional_bound > 0.0) || !(self.regional_step_sigma >= 0.0) || !(self.reference_noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig("regional walk and noise parameters must be non-negative".into()));
        }
        Ok(())
    }

    pub fn site_records(&self) -> Vec<SiteRecord> {
        self.sites.iter().map(|s| s.site.clone()).collect()
    }
}

/// Regional component: a Gaussian random walk reflected into `[-bound, bound]`.
pub fn regional_walk(seed: u64, duration_hours: u32, step_sigma: f64, bound: f64) -> Vec<f64> {
    let mut rng = Stream::new(seed, 0);
    let mut r = 0.0;
    (0..duration_hours)
        .map(|_| {
            let v = r;
            r += rng.gaussian(step_sigma);
            // reflect until inside (large steps may cross twice)
            while r.abs() > bound {
                r = if r > bound { 2.0 * bound - r } else { -2.0 * bound - r };
            }
            v
        })
        .collect()
}

fn diurnal(model: &TruthModel, hour: Hour) -> f64 {
    let x = 2.0 * std::f64::consts::PI * (hour.hour_of_day() as f64 - model.phase_hours) / 24.0;
    model.amplitude * x.sin()
}

/// Truth series for a site that is not derived from another.
pub fn generate_truth(
    site_id: &str,
    model: &TruthModel,
    start: Hour,
    regional: &[f64],
    noise: &mut Stream,
) -> Result<TimeSeries> {
    let obs = regional
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let hour = start.offset(i as i64);
            let x =
                model.baseline + diurnal(model, hour) + model.regional_weight * r + noise.gaussian(model.noise_sigma);
            Observation::new(hour, x.max(0.0))
        })
        .collect();
    TimeSeries::new(site_id, obs)
}

/// Truth derived from another site: `max(0, b0 + b1 X_src + e)`.
pub fn derive_truth(site_id: &str, source: &TimeSeries, rel: &ProxyRelation, noise: &mut Stream) -> Result<TimeSeries> {
    let obs = source
        .observations()
        .iter()
        .map(|o| Observation::new(o.hour, (rel.b0 + rel.b1 * o.value + noise.gaussian(rel.sigma_e)).max(0.0)))
        .collect();
    TimeSeries::new(site_id, obs)
}

/// Sensor output `Y = (X - a0 - eps) / a1` with time-varying effective
/// parameters; during a flatline the previous output is repeated.
pub fn apply_sensor_model(
    truth: &TimeSeries,
    model: &SensorModel,
    start: Hour,
    noise: &mut Stream,
) -> Result<TimeSeries> {
    let mut last = None;
    let obs = truth
        .observations()
        .iter()
        .map(|o| {
            let i = o.hour.hours_since(start).max(0) as u32;
            let eps = noise.gaussian(model.noise_sigma);
            let (a0, a1) = model.effective(i);
            let fresh = (o.value - a0 - eps) / a1;
            let y = match last {
                Some(prev) if model.flatlined(i) => prev,
                _ => fresh,
            };
            last = Some(y);
            Observation::new(o.hour, y)
        })
        .collect();
    TimeSeries::new(truth.site_id(), obs)
}

/// Everything a scenario produces.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOutput {
    pub sites: Vec<SiteRecord>,
    /// Ground truth, one series per site, no gaps.
    pub truth: Vec<TimeSeries>,
    /// What the network reports: reference analyzer series for reference
    /// sites, sensor output for low-cost sites, with missing hours removed.
    pub observed: Vec<TimeSeries>,
}

impl ScenarioOutput {
    pub fn truth_of(&self, id: &str) -> Option<&TimeSeries> {
        self.truth.iter().find(|s| s.site_id() == id)
    }

    pub fn observed_of(&self, id: &str) -> Option<&TimeSeries> {
        self.observed.iter().find(|s| s.site_id() == id)
    }

    pub fn site(&self, id: &str) -> Option<&SiteRecord> {
        self.sites.iter().find(|s| s.id == id)
    }
}

/// Generates the full dataset for `scenario`.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioOutput> {
    scenario.validate()?;
    let regional =
        regional_walk(scenario.seed, scenario.duration_hours, scenario.regional_step_sigma, scenario.regional_bound);

    let mut truth: Vec<Option<TimeSeries>> = vec![None; scenario.sites.len()];
    let mut truth_noise: Vec<Stream> =
        (0..scenario.sites.len()).map(|i| Stream::new(scenario.seed, 3 * i as u64 + 1)).collect();
    for (i, spec) in scenario.sites.iter().enumerate() {
        if spec.truth.derived_from.is_none() {
            truth[i] =
                Some(generate_truth(&spec.site.id, &spec.truth, scenario.start, &regional, &mut truth_noise[i])?);
        }
    }
    // derived sites, resolved in passes so chains work in any order
    loop {
        let mut progressed = false;
        let mut pending = false;
        for (i, spec) in scenario.sites.iter().enumerate() {
            let Some(rel) = &spec.truth.derived_from else { continue };
            if truth[i].is_some() {
                continue;
            }
            let src = scenario.sites.iter().position(|s| s.site.id == rel.site).expect("validated");
            match truth[src].clone() {
                Some(source) => {
                    truth[i] = Some(derive_truth(&spec.site.id, &source, rel, &mut truth_noise[i])?);
                    progressed = true;
                }
                None => pending = true,
            }
        }
        if !pending {
            break;
        }
        if !progressed {
            return Err(Error::InvalidConfig("cyclic derived_from relations".into()));
        }
    }
    let truth: Vec<TimeSeries> = truth.into_iter().map(|t| t.expect("all resolved")).collect();

    let mut observed = Vec::with_capacity(truth.len());
    for (i, (spec, x)) in scenario.sites.iter().zip(&truth).enumerate() {
        let mut inst = Stream::new(scenario.seed, 3 * i as u64 + 2);
        let full = match (spec.site.role, &spec.sensor) {
            (Role::LowCost, Some(model)) => apply_sensor_model(x, model, scenario.start, &mut inst)?,
            _ => x.map_values(|_, v| v + inst.gaussian(scenario.reference_noise_sigma))?,
        };
        let mut gaps = Stream::new(scenario.seed, 3 * i as u64 + 3);
        let kept =
            full.observations().iter().filter(|_| gaps.uniform() >= scenario.missing_fraction).copied().collect();
        observed.push(TimeSeries::new(&spec.site.id, kept)?);
    }

    Ok(ScenarioOutput { sites: scenario.site_records(), truth, observed })
}
