//! Run configuration in TOML.
//!
//! ```toml
//! seed = 7
//! total_steps = 50000
//! snapshot_schedule = [0, 10000, 50000]
//! output_dir = "out"
//!
//! [params]
//! n = 1000
//! k_avg = 10
//! d = 0.25
//! w = 0.5
//! p = 0.1
//! initial = { kind = "power-law", gamma = 3.0, x_min = 0.01 }
//! ```
//!
//! Unknown keys are rejected at every level.

use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::analysis::DEFAULT_BINS;
use crate::dynamics::{
    validate_schedule, DynamicsError, DynamicsOptions, ModelParams, MutationTarget, RewireSearch,
    DEFAULT_PROBE_LIMIT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Semantic(String),
}

impl From<DynamicsError> for ConfigError {
    fn from(e: DynamicsError) -> Self {
        ConfigError::Semantic(e.to_string())
    }
}

/// A fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub total_steps: u64,
    pub snapshot_schedule: Vec<u64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// `0` means scan every node when rewiring.
    pub rewire_probe_limit: u32,
    pub mutation_target: MutationTarget,
    pub bins: usize,
}

impl RunConfig {
    /// Config with default knobs; the schedule is `{0, total_steps}`.
    pub fn new(params: ModelParams, total_steps: u64) -> Self {
        RunConfig {
            params,
            total_steps,
            snapshot_schedule: default_schedule(total_steps),
            seed: 0,
            output_dir: PathBuf::from("out"),
            rewire_probe_limit: DEFAULT_PROBE_LIMIT,
            mutation_target: MutationTarget::default(),
            bins: DEFAULT_BINS,
        }
    }

    pub fn dynamics_options(&self) -> DynamicsOptions {
        DynamicsOptions {
            rewire_search: RewireSearch::from_probe_limit(self.rewire_probe_limit),
            mutation_target: self.mutation_target,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        validate_schedule(&self.snapshot_schedule, self.total_steps)?;
        if self.bins < 2 {
            return Err(ConfigError::Semantic(format!(
                "bins must be at least 2, got {}",
                self.bins
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        let raw = RawConfig {
            seed: Some(Seed(self.seed)),
            total_steps: Some(self.total_steps),
            snapshot_schedule: Some(self.snapshot_schedule.clone()),
            output_dir: Some(self.output_dir.clone()),
            rewire_probe_limit: Some(self.rewire_probe_limit),
            mutation_target: Some(self.mutation_target),
            bins: Some(self.bins),
            params: Some(self.params.clone()),
        };
        toml::to_string(&raw).expect("config is always representable")
    }
}

fn default_schedule(total_steps: u64) -> Vec<u64> {
    if total_steps == 0 {
        vec![0]
    } else {
        vec![0, total_steps]
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<Seed>,
    #[serde(skip_serializing_if = "Option::is_none")]
    total_steps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    snapshot_schedule: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rewire_probe_limit: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mutation_target: Option<MutationTarget>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bins: Option<usize>,
    params: Option<ModelParams>,
}

/// TOML integers are signed 64-bit; seeds above `i64::MAX` are written as strings
/// and either form is accepted on input.
#[derive(Debug, Clone, Copy)]
struct Seed(u64);

impl Serialize for Seed {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(self.0) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&self.0.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Seed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(Seed(v)),
            Repr::Str(s) => s
                .parse()
                .map(Seed)
                .map_err(|_| serde::de::Error::custom(format!("seed {s:?} is not a 64-bit unsigned integer"))),
        }
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |nl| before.len() - nl - 1) + 1;
    (line, column)
}

/// Parses and validates a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |span| line_column(text, span.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let params = raw
        .params
        .ok_or_else(|| ConfigError::Semantic("missing [params] table".into()))?;
    let total_steps = raw
        .total_steps
        .ok_or_else(|| ConfigError::Semantic("missing total_steps".into()))?;
    // Parameter ranges are checked before anything sized by them is built.
    params.validate()?;
    let config = RunConfig {
        snapshot_schedule: raw
            .snapshot_schedule
            .unwrap_or_else(|| default_schedule(total_steps)),
        seed: raw.seed.map_or(0, |s| s.0),
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        rewire_probe_limit: raw.rewire_probe_limit.unwrap_or(DEFAULT_PROBE_LIMIT),
        mutation_target: raw.mutation_target.unwrap_or_default(),
        bins: raw.bins.unwrap_or(DEFAULT_BINS),
        params,
        total_steps,
    };
    config.validate()?;
    Ok(config)
}
