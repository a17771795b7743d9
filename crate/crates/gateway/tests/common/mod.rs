#![allow(dead_code)]

use std::path::{Path, PathBuf};

use edgearm::fixtures::{two_node_testbed, STACKDEMO_COMPOSE, STACKDEMO_REQUIREMENTS};
use edgearm::model::{render_report, OrchestratorConfig, COMPOSE_FILE, REQUIREMENTS_FILE};
use tempfile::TempDir;

pub struct Fixture {
    pub dir: TempDir,
    pub config_path: PathBuf,
}

impl Fixture {
    /// A workspace with the stackdemo repository, the two-node report and a
    /// config file. `extra` is appended to the config YAML.
    pub fn new(extra: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let app = dir.path().join("stackdemo");
        std::fs::create_dir_all(&app).unwrap();
        std::fs::write(app.join(COMPOSE_FILE), STACKDEMO_COMPOSE).unwrap();
        std::fs::write(app.join(REQUIREMENTS_FILE), STACKDEMO_REQUIREMENTS).unwrap();
        std::fs::write(dir.path().join("report.json"), render_report(&two_node_testbed())).unwrap();
        let config_path = dir.path().join("edge-arm.yml");
        std::fs::write(
            &config_path,
            format!(
                "state_dir: state\nreport_path: report.json\ncommand_script: commands.sh\nhttp_addr: 127.0.0.1:0\n{extra}"
            ),
        )
        .unwrap();
        Self { dir, config_path }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn app(&self) -> PathBuf {
        self.dir.path().join("stackdemo")
    }

    pub fn config(&self) -> OrchestratorConfig {
        OrchestratorConfig::load(&self.config_path).unwrap()
    }
}
