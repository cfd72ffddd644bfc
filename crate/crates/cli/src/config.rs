//! Run configuration: one JSON document, overridable from the command line.
//!
//! Precedence, highest first: command-line flags, config fields, catalog
//! defaults, built-in defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use fiblab_core::catalog;
use fiblab_core::discriminant::{Ball, DiscriminantCfg};
use fiblab_core::flow::{FlowOpts, SeedCfg};
use fiblab_core::optimize::DescentCfg;
use fiblab_core::regularity::DregThresholds;
use fiblab_core::{Map, MapDocument, SamplerCfg, Tolerances};
use serde::{Deserialize, Serialize};

/// Radius used for inline maps without an explicit `epsilon`.
pub const DEFAULT_EPSILON: f64 = 0.5;

/// Invalid configuration; `field` names the offending entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at {}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// A catalog name or an inline map document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSpec {
    Name(String),
    Inline(MapDocument),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularitySection {
    pub thresholds: DregThresholds,
    pub descent: DescentCfg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminantSection {
    pub ball: Ball,
    pub search: DiscriminantCfg,
    /// Multi-start seeds of the critical-point search.
    pub seeds: usize,
    /// Angular radius of the exclusion zone around discriminant rays.
    pub exclusion_angle: f64,
    pub f_floor: f64,
}

impl Default for DiscriminantSection {
    fn default() -> Self {
        DiscriminantSection {
            ball: Ball::default(),
            search: DiscriminantCfg::default(),
            seeds: 2000,
            exclusion_angle: 0.05,
            f_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub integrator: FlowOpts,
    pub seeds: SeedCfg,
    pub drift_tolerance: f64,
    /// Relative to `epsilon`.
    pub round_trip_tolerance: f64,
    pub refine: bool,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            integrator: FlowOpts::default(),
            seeds: SeedCfg::default(),
            drift_tolerance: 1e-5,
            round_trip_tolerance: 1e-6,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub map: MapSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Outer radius of the discriminant linearity check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sampler: SamplerCfg,
    #[serde(default)]
    pub regularity: RegularitySection,
    #[serde(default)]
    pub discriminant: DiscriminantSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn for_map(map: MapSpec) -> Self {
        RunConfig {
            map,
            epsilon: None,
            delta: None,
            eta: None,
            tolerances: Tolerances::default(),
            sampler: SamplerCfg::default(),
            regularity: RegularitySection::default(),
            discriminant: DiscriminantSection::default(),
            flow: FlowSection::default(),
            output: None,
            strict: false,
            threads: None,
        }
    }

    /// Parses a config document. A bare map document is accepted as a
    /// config with every other field at its default.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| ConfigError::new("config", format!("invalid JSON: {e}")))?;
        if value.get("components").is_some() {
            let doc: MapDocument = serde_json::from_value(value)
                .map_err(|e| ConfigError::new("map", e.to_string()))?;
            return Ok(RunConfig::for_map(MapSpec::Inline(doc)));
        }
        serde_json::from_value(value).map_err(|e| ConfigError::new("config", e.to_string()))
    }

    /// Reads `source` as a JSON file if it exists, otherwise as a catalog name.
    pub fn load(source: &str) -> Result<Self, ConfigError> {
        let path = Path::new(source);
        if path.is_file() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::new("config", format!("cannot read {source}: {e}")))?;
            return Self::from_json(&text);
        }
        if source.ends_with(".json") {
            return Err(ConfigError::new(
                "config",
                format!("file not found: {source}"),
            ));
        }
        catalog::entry(source).map_err(core_error)?;
        Ok(RunConfig::for_map(MapSpec::Name(source.to_string())))
    }
}

/// Command-line values that take precedence over the config document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
    pub seeds: Option<usize>,
    pub out: Option<PathBuf>,
    pub strict: bool,
    pub threads: Option<usize>,
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub map: Map,
    pub map_name: String,
    pub epsilon: f64,
    pub delta: f64,
    pub eta: Option<f64>,
    pub config: RunConfig,
    pub out: PathBuf,
    pub strict: bool,
    pub threads: Option<usize>,
}

fn core_error(e: fiblab_core::Error) -> ConfigError {
    match e {
        fiblab_core::Error::Input { location, message } => ConfigError::new(location, message),
        other => ConfigError::new("map", other.to_string()),
    }
}

fn positive(field: &str, value: f64) -> Result<(), ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(
            field,
            format!("must be positive, got {value}"),
        ))
    }
}

pub fn resolve(mut config: RunConfig, overrides: &Overrides) -> Result<Resolved, ConfigError> {
    let (map, map_name, defaults): (Map, String, Option<(f64, f64)>) = match &config.map {
        MapSpec::Name(name) => {
            let entry = catalog::entry(name).map_err(core_error)?;
            (
                entry.map(),
                entry.name.to_string(),
                Some((entry.epsilon, entry.delta)),
            )
        }
        MapSpec::Inline(doc) => {
            let map = Map::from_document(doc).map_err(|e| match e {
                fiblab_core::Error::Input { location, message } => {
                    ConfigError::new(format!("map.{location}"), message)
                }
                other => ConfigError::new("map", other.to_string()),
            })?;
            let name = doc.name.clone().unwrap_or_else(|| "inline".to_string());
            (map, name, None)
        }
    };
    if let Some(e) = overrides.epsilon {
        config.epsilon = Some(e);
    }
    if let Some(d) = overrides.delta {
        config.delta = Some(d);
    }
    if let Some(seed) = overrides.seed {
        config.sampler.seed = seed;
        config.flow.seeds.seed = seed;
    }
    if let Some(count) = overrides.seeds {
        config.flow.seeds.count = count;
    }
    let epsilon = config
        .epsilon
        .or(defaults.map(|d| d.0))
        .unwrap_or(DEFAULT_EPSILON);
    positive("epsilon", epsilon)?;
    let delta = match (config.delta, config.epsilon, defaults) {
        (Some(d), _, _) => d,
        (None, None, Some((_, d))) => d,
        _ => epsilon / 100.0,
    };
    positive("delta", delta)?;
    if delta > epsilon / 10.0 {
        return Err(ConfigError::new(
            "delta",
            format!("need delta <= epsilon/10, got delta = {delta}, epsilon = {epsilon}"),
        ));
    }
    if let Some(eta) = config.eta {
        positive("eta", eta)?;
    }
    config
        .tolerances
        .validate()
        .map_err(|m| ConfigError::new("tolerances", m))?;
    if config.sampler.samples == 0 {
        return Err(ConfigError::new("sampler.samples", "must be at least 1"));
    }
    let t = &config.regularity.thresholds;
    positive("regularity.thresholds.fail", t.fail)?;
    if t.pass <= t.fail || t.pass.is_nan() {
        return Err(ConfigError::new(
            "regularity.thresholds.pass",
            format!("must exceed the fail threshold {}, got {}", t.fail, t.pass),
        ));
    }
    let d = &config.discriminant;
    positive("discriminant.ball.radius", d.ball.radius)?;
    positive("discriminant.exclusion_angle", d.exclusion_angle)?;
    positive("discriminant.search.critical_tol", d.search.critical_tol)?;
    positive("discriminant.search.cluster_angle", d.search.cluster_angle)?;
    if d.seeds == 0 {
        return Err(ConfigError::new("discriminant.seeds", "must be at least 1"));
    }
    let f = &config.flow;
    positive("flow.integrator.rtol", f.integrator.rtol)?;
    positive("flow.integrator.atol", f.integrator.atol)?;
    positive("flow.integrator.event_tol", f.integrator.event_tol)?;
    positive("flow.drift_tolerance", f.drift_tolerance)?;
    positive("flow.round_trip_tolerance", f.round_trip_tolerance)?;
    if f.seeds.count == 0 {
        return Err(ConfigError::new("flow.seeds.count", "must be at least 1"));
    }
    let threads = overrides.threads.or(config.threads).or_else(env_threads);
    if threads == Some(0) {
        return Err(ConfigError::new("threads", "must be at least 1"));
    }
    let out = overrides
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("fiblab-out"));
    Ok(Resolved {
        map,
        map_name,
        epsilon,
        delta,
        eta: config.eta,
        strict: overrides.strict || config.strict,
        config,
        out,
        threads,
    })
}

fn env_threads() -> Option<usize> {
    std::env::var("FIBLAB_THREADS").ok()?.trim().parse().ok()
}
