//! Global orchestrator configuration, one YAML file re-read on every watcher tick.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    Simulated,
    CommandScript,
}

/// Seconds between checks of each watcher source. `.inf` disables a source.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WatcherPeriods {
    pub files: f64,
    pub infra: f64,
    pub placement: f64,
    pub commands: f64,
}

impl Default for WatcherPeriods {
    fn default() -> Self {
        Self {
            files: 5.0,
            infra: 5.0,
            placement: 15.0,
            commands: 2.0,
        }
    }
}

impl WatcherPeriods {
    pub fn as_array(&self) -> [f64; 4] {
        [self.files, self.infra, self.placement, self.commands]
    }

    /// `None` for a disabled source.
    pub fn duration(secs: f64) -> Option<Duration> {
        secs.is_finite().then(|| Duration::from_secs_f64(secs))
    }
}

/// Optional built-in simulated world for the daemon: a testbed whose
/// monitor publishes the report file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub nodes: usize,
    #[serde(default = "default_regions")]
    pub regions: usize,
    #[serde(default)]
    pub perturb: bool,
}

fn default_regions() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrchestratorConfig {
    pub periods: WatcherPeriods,
    pub sensitivity: f64,
    pub seed: u64,
    pub backend: BackendKind,
    pub hw_unit: String,
    /// Monitor restructures its overlay every this many published ticks.
    pub restructure_every: u64,
    pub state_dir: PathBuf,
    /// Infrastructure report consumed by the watcher.
    pub report_path: PathBuf,
    /// Output of the command-script backend.
    pub command_script: PathBuf,
    pub http_addr: String,
    pub history_capacity: usize,
    pub simulation: Option<SimulationConfig>,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            periods: WatcherPeriods::default(),
            sensitivity: 0.1,
            seed: 0,
            backend: BackendKind::Simulated,
            hw_unit: "MB".into(),
            restructure_every: 10,
            state_dir: PathBuf::from(".edge-arm"),
            report_path: PathBuf::from(".edge-arm/infra-report.json"),
            command_script: PathBuf::from(".edge-arm/commands.sh"),
            http_addr: "127.0.0.1:8080".into(),
            history_capacity: 1000,
            simulation: None,
        }
    }
}

impl OrchestratorConfig {
    pub fn from_yaml(text: &str) -> Result<Self, ModelError> {
        let cfg: Self = if text.trim().is_empty() {
            Self::default()
        } else {
            serde_yaml::from_str(text).map_err(|e| ModelError::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_yaml(&text)?;
        // Relative paths are resolved against the config file's directory.
        if let Some(base) = path.parent() {
            for p in [&mut cfg.state_dir, &mut cfg.report_path, &mut cfg.command_script] {
                if p.is_relative() {
                    *p = base.join(&p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for p in self.periods.as_array() {
            if !(p > 0.0) {
                return Err(ModelError::Config(format!("watcher period {p} must be > 0")));
            }
        }
        if !(self.sensitivity > 0.0 && self.sensitivity < 1.0) {
            return Err(ModelError::Config(format!("sensitivity {} not in (0,1)", self.sensitivity)));
        }
        if self.restructure_every == 0 {
            return Err(ModelError::Config("restructure_every must be positive".into()));
        }
        Ok(())
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("config serializes")
    }
}
