//! Run configuration shared by the CLI, sweeps and summary files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Algorithm, HyperparamError, Hyperparams, DEFAULT_CB, DEFAULT_DELTA};
use crate::env_gen::{GenError, GeneratorSpec};
use crate::harness::{CheckLevel, ExperimentSpec, InitStateSchedule};
use crate::mdp::{MdpError, RawMdp, TabularMdp};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Generator(#[from] GenError),
    #[error("MDP file {path}: {source}")]
    MdpFile { path: PathBuf, source: MdpError },
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Hyperparams(#[from] HyperparamError),
    #[error("reading config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing config {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Invalid(String),
}

/// Where a run's MDP comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvSource {
    Generator(GeneratorSpec),
    MdpFile(PathBuf),
    Inline(RawMdp),
}

impl EnvSource {
    pub fn load(&self) -> Result<TabularMdp, ConfigError> {
        match self {
            EnvSource::Generator(spec) => Ok(spec.build()?),
            EnvSource::MdpFile(path) => TabularMdp::load(path).map_err(|source| ConfigError::MdpFile {
                path: path.clone(),
                source,
            }),
            EnvSource::Inline(raw) => Ok(TabularMdp::from_raw(raw)?),
        }
    }

    pub fn label(&self) -> String {
        match self {
            EnvSource::Generator(spec) => {
                let kind = match spec.kind {
                    crate::env_gen::GeneratorKind::Random => "random".to_string(),
                    crate::env_gen::GeneratorKind::Chain { slip } => format!("chain-slip{slip}"),
                    crate::env_gen::GeneratorKind::Needle { gap } => format!("needle-gap{gap}"),
                };
                format!("{kind}-S{}-A{}-H{}-g{}", spec.states, spec.actions, spec.horizon, spec.seed)
            }
            EnvSource::MdpFile(path) => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "mdp".to_string()),
            EnvSource::Inline(raw) => format!("inline-S{}-A{}-H{}", raw.states, raw.actions, raw.horizon),
        }
    }
}

fn yes() -> bool {
    true
}

fn default_cb() -> f64 {
    DEFAULT_CB
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

/// Everything needed to reproduce one or more runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub env: EnvSource,
    pub episodes: u64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_cb")]
    pub c_b: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub schedule: InitStateSchedule,
    #[serde(default)]
    pub check_level: CheckLevel,
    #[serde(default = "yes")]
    pub monotone: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Reads either a bare config or a run summary carrying one under `config`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| ConfigError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        let inner = match value.get("config") {
            Some(config) => config.clone(),
            None => value,
        };
        serde_json::from_value(inner).map_err(|source| ConfigError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn for_seed(&self, seed: u64) -> RunConfig {
        RunConfig {
            seeds: vec![seed],
            ..self.clone()
        }
    }

    pub fn hyperparams(&self, mdp: &TabularMdp) -> Result<Hyperparams, ConfigError> {
        Ok(Hyperparams::new(
            mdp.states(),
            mdp.actions(),
            mdp.horizon(),
            self.episodes,
            self.c_b,
            self.delta,
        )?)
    }

    pub fn experiment(&self, mdp: &TabularMdp, seed: u64) -> Result<ExperimentSpec, ConfigError> {
        Ok(ExperimentSpec {
            algorithm: self.algorithm,
            hyperparams: self.hyperparams(mdp)?,
            schedule: self.schedule,
            seed,
            check_level: self.check_level,
            monotone: self.monotone,
        })
    }
}
