//! Execution backends for action plans.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{NodeId, Placement, ServiceId};

use super::plan::{render_action, Action};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct BackendError(pub String);

/// Where placement decisions are carried out.
///
/// Calls for one plan are bracketed by `begin_plan` / `end_plan`; after a
/// full plan succeeds, `current_placement` must equal the plan's target.
pub trait Backend {
    fn begin_plan(&mut self, _tick: u64, _app_id: &str) -> Result<(), BackendError> {
        Ok(())
    }
    fn apply_deploy(&mut self, app_id: &str, service: &ServiceId, node: &NodeId) -> Result<(), BackendError>;
    fn apply_migrate(&mut self, app_id: &str, service: &ServiceId, from: &NodeId, to: &NodeId)
        -> Result<(), BackendError>;
    fn apply_remove(&mut self, app_id: &str, service: &ServiceId) -> Result<(), BackendError>;
    fn remove_app(&mut self, app_id: &str) -> Result<(), BackendError>;
    fn end_plan(&mut self, _completed: bool) -> Result<(), BackendError> {
        Ok(())
    }
    fn current_placement(&self, app_id: &str) -> Option<Placement>;
    /// Snapshot of the tracked cluster, for backends that can be persisted.
    fn cluster_state(&self) -> Option<ClusterState> {
        None
    }

    fn apply_action(&mut self, app_id: &str, action: &Action) -> Result<(), BackendError> {
        match action {
            Action::Deploy { service, node } => self.apply_deploy(app_id, service, node),
            Action::Migrate { service, from, to } => self.apply_migrate(app_id, service, from, to),
            Action::Remove { service } => self.apply_remove(app_id, service),
            Action::RemoveApp => self.remove_app(app_id),
        }
    }
}

/// Hostname constraints per service, per application.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterState {
    pub apps: BTreeMap<String, BTreeMap<ServiceId, BTreeSet<NodeId>>>,
}

impl ClusterState {
    /// A service runs where its single hostname constraint points; services
    /// with no or conflicting constraints are not scheduled.
    pub fn placement(&self, app_id: &str) -> Option<Placement> {
        let services = self.apps.get(app_id)?;
        let mut p = Placement::new(app_id);
        for (s, constraints) in services {
            if constraints.len() == 1 {
                p.assignment
                    .insert(s.clone(), constraints.iter().next().cloned().expect("one constraint"));
            }
        }
        Some(p)
    }

    fn resolve_name(&self, name: &str) -> Option<(String, ServiceId)> {
        let known = self
            .apps
            .keys()
            .filter(|app| name.len() > app.len() + 1 && name.starts_with(app.as_str()) && name.as_bytes()[app.len()] == b'_')
            .max_by_key(|app| app.len());
        match known {
            Some(app) => Some((app.clone(), ServiceId::new(&name[app.len() + 1..]))),
            None => name
                .split_once('_')
                .map(|(a, s)| (a.to_owned(), ServiceId::new(s))),
        }
    }
}

pub type FailureHook = Box<dyn FnMut(&str, &Action) -> Option<String> + Send>;

/// In-memory cluster with instantaneous, reliable actuation. A failure hook
/// can reject chosen actions.
#[derive(Default)]
pub struct SimulatedBackend {
    state: ClusterState,
    failure: Option<FailureHook>,
}

impl std::fmt::Debug for SimulatedBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimulatedBackend").field("state", &self.state).finish()
    }
}

impl SimulatedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_state(state: ClusterState) -> Self {
        Self { state, failure: None }
    }

    pub fn state(&self) -> &ClusterState {
        &self.state
    }

    pub fn set_failure_hook(&mut self, hook: Option<FailureHook>) {
        self.failure = hook;
    }

    /// Out-of-band change, as if an operator moved a container by hand.
    pub fn tamper(&mut self, app_id: &str, service: &ServiceId, node: Option<&NodeId>) {
        let services = self.state.apps.entry(app_id.to_owned()).or_default();
        match node {
            Some(n) => {
                services.insert(service.clone(), BTreeSet::from([n.clone()]));
            }
            None => {
                services.remove(service);
            }
        }
    }

    fn check(&mut self, app_id: &str, action: &Action) -> Result<(), BackendError> {
        if let Some(hook) = self.failure.as_mut() {
            if let Some(cause) = hook(app_id, action) {
                return Err(BackendError(cause));
            }
        }
        Ok(())
    }

    fn constraints(&mut self, app_id: &str, service: &ServiceId) -> &mut BTreeSet<NodeId> {
        self.state
            .apps
            .entry(app_id.to_owned())
            .or_default()
            .entry(service.clone())
            .or_default()
    }

    /// Interprets one docker CLI line as produced by
    /// [`render_commands`](super::render_commands). Blank lines and `#`
    /// comments are ignored.
    pub fn execute_line(&mut self, line: &str) -> Result<(), BackendError> {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return Ok(());
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let bad = || BackendError(format!("unsupported command: {line}"));
        match words.as_slice() {
            ["docker", "service", "update", flag, constraint, name] => {
                let node = constraint.strip_prefix("node.hostname==").ok_or_else(bad)?;
                let (app, service) = self.state.resolve_name(name).ok_or_else(bad)?;
                let set = self.constraints(&app, &service);
                match *flag {
                    "--constraint-add" => {
                        set.insert(NodeId::new(node));
                    }
                    "--constraint-rm" => {
                        set.remove(node);
                    }
                    _ => return Err(bad()),
                }
                Ok(())
            }
            ["docker", "service", "rm", name] => {
                let (app, service) = self.state.resolve_name(name).ok_or_else(bad)?;
                if let Some(services) = self.state.apps.get_mut(&app) {
                    services.remove(&service);
                }
                Ok(())
            }
            ["docker", "stack", "rm", app] => {
                self.state.apps.remove(*app);
                Ok(())
            }
            _ => Err(bad()),
        }
    }
}

impl Backend for SimulatedBackend {
    fn apply_deploy(&mut self, app_id: &str, service: &ServiceId, node: &NodeId) -> Result<(), BackendError> {
        let action = Action::Deploy {
            service: service.clone(),
            node: node.clone(),
        };
        self.check(app_id, &action)?;
        self.constraints(app_id, service).insert(node.clone());
        Ok(())
    }

    fn apply_migrate(&mut self, app_id: &str, service: &ServiceId, from: &NodeId, to: &NodeId) -> Result<(), BackendError> {
        let action = Action::Migrate {
            service: service.clone(),
            from: from.clone(),
            to: to.clone(),
        };
        self.check(app_id, &action)?;
        let set = self.constraints(app_id, service);
        set.remove(from);
        set.insert(to.clone());
        Ok(())
    }

    fn apply_remove(&mut self, app_id: &str, service: &ServiceId) -> Result<(), BackendError> {
        self.check(app_id, &Action::Remove { service: service.clone() })?;
        if let Some(services) = self.state.apps.get_mut(app_id) {
            services.remove(service);
        }
        Ok(())
    }

    fn remove_app(&mut self, app_id: &str) -> Result<(), BackendError> {
        self.check(app_id, &Action::RemoveApp)?;
        self.state.apps.remove(app_id);
        Ok(())
    }

    fn current_placement(&self, app_id: &str) -> Option<Placement> {
        self.state.placement(app_id)
    }

    fn cluster_state(&self) -> Option<ClusterState> {
        Some(self.state.clone())
    }
}

/// Appends the docker CLI lines of every applied plan to a script file,
/// headed by `# tick <n> app <id>`, and never executes them. Placement is
/// tracked by an inner simulated cluster.
#[derive(Debug)]
pub struct CommandScriptBackend {
    path: PathBuf,
    inner: SimulatedBackend,
    pending: Vec<String>,
}

impl CommandScriptBackend {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self::with_state(path, ClusterState::default())
    }

    pub fn with_state(path: impl Into<PathBuf>, state: ClusterState) -> Self {
        Self {
            path: path.into(),
            inner: SimulatedBackend::from_state(state),
            pending: Vec::new(),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn state(&self) -> &ClusterState {
        self.inner.state()
    }

    pub fn simulated_mut(&mut self) -> &mut SimulatedBackend {
        &mut self.inner
    }

    fn record(&mut self, app_id: &str, action: &Action) {
        self.pending.extend(render_action(app_id, action));
    }
}

impl Backend for CommandScriptBackend {
    fn begin_plan(&mut self, tick: u64, app_id: &str) -> Result<(), BackendError> {
        self.pending.clear();
        self.pending.push(format!("# tick {tick} app {app_id}"));
        Ok(())
    }

    fn apply_deploy(&mut self, app_id: &str, service: &ServiceId, node: &NodeId) -> Result<(), BackendError> {
        self.inner.apply_deploy(app_id, service, node)?;
        self.record(
            app_id,
            &Action::Deploy {
                service: service.clone(),
                node: node.clone(),
            },
        );
        Ok(())
    }

    fn apply_migrate(&mut self, app_id: &str, service: &ServiceId, from: &NodeId, to: &NodeId) -> Result<(), BackendError> {
        self.inner.apply_migrate(app_id, service, from, to)?;
        self.record(
            app_id,
            &Action::Migrate {
                service: service.clone(),
                from: from.clone(),
                to: to.clone(),
            },
        );
        Ok(())
    }

    fn apply_remove(&mut self, app_id: &str, service: &ServiceId) -> Result<(), BackendError> {
        self.inner.apply_remove(app_id, service)?;
        self.record(app_id, &Action::Remove { service: service.clone() });
        Ok(())
    }

    fn remove_app(&mut self, app_id: &str) -> Result<(), BackendError> {
        self.inner.remove_app(app_id)?;
        self.record(app_id, &Action::RemoveApp);
        Ok(())
    }

    /// Lines of actions that did complete are written even when the plan
    /// failed midway, since those actions took effect.
    fn end_plan(&mut self, _completed: bool) -> Result<(), BackendError> {
        let lines = std::mem::take(&mut self.pending);
        if lines.len() <= 1 {
            return Ok(());
        }
        let io = |e: std::io::Error| BackendError(format!("{}: {e}", self.path.display()));
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path).map_err(io)?;
        for l in lines {
            writeln!(f, "{l}").map_err(io)?;
        }
        Ok(())
    }

    fn current_placement(&self, app_id: &str) -> Option<Placement> {
        self.inner.current_placement(app_id)
    }

    fn cluster_state(&self) -> Option<ClusterState> {
        self.inner.cluster_state()
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn begin_plan(&mut self, tick: u64, app_id: &str) -> Result<(), BackendError> {
        (**self).begin_plan(tick, app_id)
    }
    fn apply_deploy(&mut self, app_id: &str, service: &ServiceId, node: &NodeId) -> Result<(), BackendError> {
        (**self).apply_deploy(app_id, service, node)
    }
    fn apply_migrate(&mut self, app_id: &str, service: &ServiceId, from: &NodeId, to: &NodeId) -> Result<(), BackendError> {
        (**self).apply_migrate(app_id, service, from, to)
    }
    fn apply_remove(&mut self, app_id: &str, service: &ServiceId) -> Result<(), BackendError> {
        (**self).apply_remove(app_id, service)
    }
    fn remove_app(&mut self, app_id: &str) -> Result<(), BackendError> {
        (**self).remove_app(app_id)
    }
    fn end_plan(&mut self, completed: bool) -> Result<(), BackendError> {
        (**self).end_plan(completed)
    }
    fn current_placement(&self, app_id: &str) -> Option<Placement> {
        (**self).current_placement(app_id)
    }
    fn cluster_state(&self) -> Option<ClusterState> {
        (**self).cluster_state()
    }
}
