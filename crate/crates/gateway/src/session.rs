//! One CLI invocation: lock the store, rebuild the watcher from the stored
//! state, act, and write the state back.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::Utc;
use edgearm::dynamics::{build_testbed, PerturbationModel, SimulatedWorld};
use edgearm::model::{BackendKind, OrchestratorConfig, COMPOSE_FILE};
use edgearm::reconciler::{AppOutcome, ClusterState, CommandScriptBackend, SimulatedBackend};
use edgearm::watcher::{write_atomic, CommandQueue, DynBackend, FileReport, FsRepository, Watcher};

use crate::state::{AppMeta, Stamp, StateFile, Store, StoreGuard};
use crate::status::AppStatus;
use crate::GatewayError;

/// What `exec` and `rm` act on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    All,
    /// An application id or the path of its repository.
    One(String),
}

pub fn build_backend(config: &OrchestratorConfig, cluster: Option<ClusterState>) -> DynBackend {
    let cluster = cluster.unwrap_or_default();
    match config.backend {
        BackendKind::Simulated => Box::new(SimulatedBackend::from_state(cluster)),
        BackendKind::CommandScript => Box::new(CommandScriptBackend::with_state(&config.command_script, cluster)),
    }
}

pub fn build_watcher(config: &OrchestratorConfig, state: &StateFile, queue: CommandQueue) -> Watcher {
    let repo = Box::new(FsRepository::from_roots(state.roots()));
    let reports = Box::new(FileReport::new(&config.report_path));
    match &state.watcher {
        Some(ws) => {
            let backend = build_backend(config, ws.cluster.clone());
            Watcher::restore(ws.clone(), backend, repo, reports, queue, config.periods)
        }
        None => Watcher::new(build_backend(config, None), repo, reports, queue, config.periods),
    }
}

/// The daemon's simulated world, if configured.
pub fn build_world(config: &OrchestratorConfig) -> Result<Option<SimulatedWorld>, GatewayError> {
    let Some(sim) = &config.simulation else { return Ok(None) };
    let baseline = build_testbed(sim.nodes, sim.regions).map_err(|e| GatewayError::State(e.to_string()))?;
    Ok(Some(SimulatedWorld::new(
        baseline,
        PerturbationModel::default(),
        sim.perturb,
        config.seed,
        config.sensitivity,
        config.restructure_every,
    )))
}

/// Folds reasoning outcomes into the per-app metadata and forgets apps the
/// watcher no longer manages.
pub fn absorb(meta: &mut BTreeMap<String, AppMeta>, watcher: &Watcher, outcomes: &[AppOutcome]) {
    let seq = watcher.snapshot().map_or(0, |s| s.timestamp());
    for outcome in outcomes {
        if let Some(m) = meta.get_mut(&outcome.app_id) {
            if outcome.reasoning.is_some() {
                m.steps += 1;
            }
            if outcome.error.is_none() && !outcome.plan.is_empty() {
                m.last_update = Some(Stamp::now(seq));
            }
        }
    }
    let managed = watcher.managed_apps();
    meta.retain(|app, _| managed.contains(app));
}

pub struct Session {
    config: OrchestratorConfig,
    store: Store,
    guard: StoreGuard,
    state: StateFile,
    watcher: Watcher,
}

impl Session {
    pub fn open(config: OrchestratorConfig) -> Result<Self, GatewayError> {
        let store = Store::new(&config.state_dir);
        let guard = store.lock()?;
        let state = store.load(&guard)?;
        let watcher = build_watcher(&config, &state, CommandQueue::new());
        Ok(Self {
            config,
            store,
            guard,
            state,
            watcher,
        })
    }

    pub fn watcher(&self) -> &Watcher {
        &self.watcher
    }

    pub fn apps(&self) -> &BTreeMap<String, AppMeta> {
        &self.state.apps
    }

    fn rebuild(&mut self) {
        self.state.watcher = Some(self.watcher.state());
        self.watcher = build_watcher(&self.config, &self.state, CommandQueue::new());
    }

    /// Loads the latest report. With a simulated world configured and no
    /// report yet, its unperturbed first report is published.
    fn load_report(&mut self) -> Result<(), GatewayError> {
        if !self.config.report_path.exists() {
            if let Some(mut world) = build_world(&self.config)? {
                if let Some(report) = world.advance() {
                    if let Some(dir) = self.config.report_path.parent() {
                        std::fs::create_dir_all(dir)?;
                    }
                    write_atomic(&self.config.report_path, report.as_bytes())?;
                }
            }
        }
        self.watcher.tick_infra();
        Ok(())
    }

    fn resolve(&self, name: &str) -> Result<String, GatewayError> {
        if self.state.apps.contains_key(name) || self.watcher.reconciler().placement(name).is_some() {
            return Ok(name.to_owned());
        }
        if let Ok(path) = Path::new(name).canonicalize() {
            if let Some((app, _)) = self.state.apps.iter().find(|(_, m)| m.root == path) {
                return Ok(app.clone());
            }
        }
        Err(GatewayError::UnknownApp(name.to_owned()))
    }

    fn targets(&self, target: &Target) -> Result<Vec<String>, GatewayError> {
        match target {
            Target::All => {
                let mut apps: Vec<String> = self.state.apps.keys().cloned().collect();
                apps.extend(self.watcher.reconciler().committed().keys().cloned());
                apps.sort();
                apps.dedup();
                Ok(apps)
            }
            Target::One(name) => Ok(vec![self.resolve(name)?]),
        }
    }

    fn finish(&mut self, outcomes: &[AppOutcome]) -> Result<(), GatewayError> {
        absorb(&mut self.state.apps, &self.watcher, outcomes);
        self.state.watcher = Some(self.watcher.state());
        self.store.save(&self.guard, &mut self.state)?;
        Ok(())
    }

    /// Registers the application in `path` (its directory name is the id)
    /// and runs its first reasoning step. Returns the app id and outcomes.
    pub fn add(&mut self, path: &Path) -> Result<(String, Vec<AppOutcome>), GatewayError> {
        let root: PathBuf = path.canonicalize().map_err(|_| GatewayError::MissingDescriptor(path.to_owned()))?;
        if !root.join(COMPOSE_FILE).is_file() {
            return Err(GatewayError::MissingDescriptor(root));
        }
        let app_id = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| GatewayError::MissingDescriptor(root.clone()))?;
        let now = Utc::now();
        let entry = self.state.apps.entry(app_id.clone()).or_insert_with(|| AppMeta {
            root: root.clone(),
            added_at: now,
            last_update: None,
            steps: 0,
        });
        entry.root = root;
        self.rebuild();
        self.load_report()?;
        self.watcher.refresh(&app_id);
        let outcomes = self.watcher.run_pending();
        self.finish(&outcomes)?;
        Ok((app_id, outcomes))
    }

    /// One reasoning step per target, after re-reading its files.
    pub fn exec(&mut self, target: &Target) -> Result<Vec<AppOutcome>, GatewayError> {
        let apps = self.targets(target)?;
        self.load_report()?;
        for app in &apps {
            self.watcher.refresh(app);
        }
        let outcomes = self.watcher.run_pending();
        self.finish(&outcomes)?;
        Ok(outcomes)
    }

    pub fn rm(&mut self, target: &Target) -> Result<Vec<AppOutcome>, GatewayError> {
        let apps = self.targets(target)?;
        let outcomes: Vec<AppOutcome> = apps.iter().map(|a| self.watcher.remove_app(a)).collect();
        for o in &outcomes {
            if o.error.is_none() {
                self.state.apps.remove(&o.app_id);
            }
        }
        self.finish(&outcomes)?;
        Ok(outcomes)
    }

    pub fn status(&self) -> Vec<AppStatus> {
        let now = Utc::now();
        let mut apps: Vec<&String> = self.state.apps.keys().collect();
        let committed: Vec<&String> = self.watcher.reconciler().committed().keys().collect();
        apps.extend(committed);
        apps.sort();
        apps.dedup();
        apps.into_iter()
            .map(|a| AppStatus::build(a, &self.watcher, self.state.apps.get(a), now))
            .collect()
    }
}
