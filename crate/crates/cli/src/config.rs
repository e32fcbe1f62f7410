//! Run configuration: a TOML file, overridden field by field by flags.

use std::path::{Path, PathBuf};

use dpsac_core::model::scenario_by_name;
use dpsac_core::scheduler::{ScheduleOptions, Strategy};
use dpsac_core::sim::{SchedulerKind, SimConfig};
use dpsac_core::updater::{UpdaterConfig, UpdaterKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "DPSAC_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "results";
pub const DEFAULT_REPEATS: u32 = 5;

/// Every option of a run, all optional. Used both for the config file and
/// for the command-line overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub scenario: Option<String>,
    pub scheduler: Option<String>,
    pub updater: Option<String>,
    pub strategy: Option<String>,
    pub gamma: Option<f64>,
    /// First seed; runs use `seed..seed + repeats`.
    pub seed: Option<u64>,
    /// Explicit seed list, takes precedence over `seed` and `repeats`.
    pub seeds: Option<Vec<u64>>,
    pub repeats: Option<u32>,
    pub out_dir: Option<PathBuf>,
    /// CSV file name inside the output directory.
    pub output: Option<String>,
    pub drift_threshold: Option<f64>,
    pub max_clusters: Option<usize>,
    pub bins: Option<usize>,
    pub literal_feasibility: Option<bool>,
    /// Record wall-clock time per run. Off by default so output files are
    /// reproducible.
    pub timing: Option<bool>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Values set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &RawConfig) -> Self {
        overlay_fields!(self, top; scenario, scheduler, updater, strategy, gamma, seed, seeds,
            repeats, out_dir, output, drift_threshold, max_clusters, bins, literal_feasibility, timing);
        self
    }

    /// Fills defaults and validates. `env_out_dir` is the value of
    /// [`OUT_DIR_ENV`], which sits between the file and the flags.
    pub fn resolve(&self, env_out_dir: Option<PathBuf>) -> Result<RunConfig, CliError> {
        let scenario = self.scenario.clone().unwrap_or_else(|| "set1".into());
        scenario_by_name(&scenario).map_err(|e| CliError::Config(e.to_string()))?;

        let scheduler = match &self.scheduler {
            Some(s) => s.parse::<SchedulerKind>().map_err(CliError::Config)?,
            None => SchedulerKind::Dpsac,
        };
        let updater = match &self.updater {
            Some(s) => s.parse::<UpdaterKind>().map_err(|e| CliError::Config(e.to_string()))?,
            None => UpdaterKind::SimpleThreshold,
        };
        let mut strategy = match &self.strategy {
            Some(s) => s.parse::<Strategy>().map_err(|e| CliError::Config(e.to_string()))?,
            None => Strategy::default(),
        };
        if let Some(g) = self.gamma {
            match strategy {
                Strategy::MinMax { .. } => {
                    strategy = Strategy::min_max(g).map_err(|e| CliError::Config(e.to_string()))?
                }
                _ => return Err(CliError::Config(format!("gamma only applies to minmax, not {}", strategy.name()))),
            }
        }

        let seeds = match &self.seeds {
            Some(list) if list.is_empty() => return Err(CliError::Config("seed list is empty".into())),
            Some(list) => list.clone(),
            None => {
                let repeats = self.repeats.unwrap_or(DEFAULT_REPEATS);
                if repeats == 0 {
                    return Err(CliError::Config("repeats must be at least 1".into()));
                }
                let first = self.seed.unwrap_or(1);
                (0..repeats as u64).map(|i| first.wrapping_add(i)).collect()
            }
        };

        let mut updater_config = UpdaterConfig::default();
        if let Some(t) = self.drift_threshold {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Config(format!("drift threshold must be positive, got {t}")));
            }
            updater_config.drift_threshold = t;
        }
        if let Some(k) = self.max_clusters {
            if k == 0 {
                return Err(CliError::Config("max_clusters must be at least 1".into()));
            }
            updater_config.max_clusters = k;
        }
        if let Some(b) = self.bins {
            if b == 0 {
                return Err(CliError::Config("bins must be at least 1".into()));
            }
            updater_config.bins = b;
        }

        let out_dir = self
            .out_dir
            .clone()
            .or(env_out_dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        let output = self.output.clone().unwrap_or_else(|| "run.csv".into());
        if output.is_empty() || output.contains(['/', '\\']) {
            return Err(CliError::Config(format!("output must be a plain file name, got {output:?}")));
        }

        Ok(RunConfig {
            scenario,
            scheduler,
            updater,
            strategy,
            seeds,
            out_dir,
            output,
            updater_config,
            options: ScheduleOptions {
                literal_feasibility: self.literal_feasibility.unwrap_or(false),
            },
            timing: self.timing.unwrap_or(false),
        })
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: String,
    pub scheduler: SchedulerKind,
    pub updater: UpdaterKind,
    pub strategy: Strategy,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub output: String,
    pub updater_config: UpdaterConfig,
    pub options: ScheduleOptions,
    pub timing: bool,
}

impl RunConfig {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            scheduler: self.scheduler,
            updater: self.updater,
            strategy: self.strategy,
            updater_config: self.updater_config,
            options: self.options,
            ..SimConfig::default()
        }
    }

    pub fn csv_path(&self) -> PathBuf {
        self.out_dir.join(&self.output)
    }
}

/// Reads [`OUT_DIR_ENV`], ignoring empty values.
pub fn env_out_dir() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}
