use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, Algorithm};
use crate::env::EnvConfig;
use crate::error::{Error, Result};

/// Default sweep grid for the requirement experiment, seconds.
pub const DEFAULT_SWEEP_S: [f64; 10] = [1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0, 2.1, 2.2, 2.3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub algorithms: Vec<Algorithm>,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Trailing window of the reward moving average.
    pub moving_average_window: usize,
    /// A curve has converged once its moving average reaches this fraction
    /// of the final plateau.
    pub convergence_fraction: f64,
    /// Episodes averaged for the final reward of a run.
    pub final_window: usize,
    pub sweep_t_require_s: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            episodes: 1000,
            seeds: vec![1, 2, 3],
            out_dir: PathBuf::from("results"),
            moving_average_window: 50,
            convergence_fraction: 0.95,
            final_window: 100,
            sweep_t_require_s: DEFAULT_SWEEP_S.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    pub env: EnvConfig,
    pub agent: AgentConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io("reading config", path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Checks every section, reporting failures with their dotted key path.
    pub fn validate(&self) -> Result<()> {
        let run = &self.run;
        if run.algorithms.is_empty() {
            return Err(Error::config("run.algorithms", "select at least one algorithm"));
        }
        if run.episodes == 0 {
            return Err(Error::config("run.episodes", "must be >= 1"));
        }
        if run.seeds.is_empty() {
            return Err(Error::config("run.seeds", "need at least one seed"));
        }
        if run.moving_average_window == 0 {
            return Err(Error::config("run.moving_average_window", "must be >= 1"));
        }
        if run.final_window == 0 {
            return Err(Error::config("run.final_window", "must be >= 1"));
        }
        if !(run.convergence_fraction > 0.0 && run.convergence_fraction <= 1.0) {
            return Err(Error::config("run.convergence_fraction", "must be in (0, 1]"));
        }
        if let Some(t) = run.sweep_t_require_s.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::config("run.sweep_t_require_s", format!("values must be > 0, got {t}")));
        }
        self.env.validate().map_err(|e| section_error("env", e))?;
        self.agent.validate().map_err(|e| section_error("agent", e))?;
        Ok(())
    }
}

fn section_error(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParam { field, reason } => Error::config(format!("{section}.{field}"), reason),
        Error::NonStochasticRow { row, sum } => Error::config(
            format!("{section}.sinr_transition[{row}]"),
            format!("row sums to {sum}, expected 1"),
        ),
        other => Error::config(section, other.to_string()),
    }
}
