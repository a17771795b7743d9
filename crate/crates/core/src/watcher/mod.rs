//! The autonomic trigger.
//!
//! Four sources are polled, each on its own period: application descriptor
//! files, the published infrastructure report, drift between desired and
//! actual placement, and the operator command queue. Every source only marks
//! applications as pending; [`Watcher::run_pending`] then runs one reasoning
//! step per pending application, so simultaneous triggers coalesce.

mod commands;
mod sources;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{load_spec, parse_report, ApplicationSpec, InfrastructureSnapshot, WatcherPeriods};
use crate::reconciler::{AppOutcome, Backend, ClusterState, Committed, Reconciler, Strategy};

pub use commands::{Command, CommandQueue};
pub use sources::{
    sha256_hex, write_atomic, AppDigest, AppFiles, AppRepository, FileReport, FileUpdate, FsRepository,
    MemoryRepository, ReportSource, SharedReport, SourceDigest,
};

pub type DynBackend = Box<dyn Backend + Send>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Files,
    Infra,
    Placement,
    Commands,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Files, Source::Infra, Source::Placement, Source::Commands];

    fn index(self) -> usize {
        self as usize
    }
}

/// Why an application was skipped.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum AppIssue {
    FileUnreadable(String),
    MalformedDescriptor(String),
}

/// Per-source deadlines on a logical clock in seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    periods: WatcherPeriods,
    last: [Option<f64>; 4],
}

impl Schedule {
    pub fn new(periods: WatcherPeriods) -> Self {
        Self { periods, last: [None; 4] }
    }

    pub fn periods(&self) -> &WatcherPeriods {
        &self.periods
    }

    /// Takes effect from the next check; last run times are kept.
    pub fn set_periods(&mut self, periods: WatcherPeriods) {
        self.periods = periods;
    }

    /// When `source` is next due; `None` if disabled.
    pub fn next_due(&self, source: Source) -> Option<f64> {
        let period = self.periods.as_array()[source.index()];
        if !period.is_finite() {
            return None;
        }
        Some(self.last[source.index()].map_or(0.0, |t| t + period))
    }

    pub fn earliest_due(&self) -> Option<f64> {
        Source::ALL
            .iter()
            .filter_map(|&s| self.next_due(s))
            .min_by(|a, b| a.total_cmp(b))
    }

    pub fn due(&self, now: f64) -> Vec<Source> {
        Source::ALL
            .into_iter()
            .filter(|&s| self.next_due(s).is_some_and(|t| t <= now))
            .collect()
    }

    pub fn mark(&mut self, source: Source, now: f64) {
        self.last[source.index()] = Some(now);
    }
}

/// What one scheduled step did.
#[derive(Debug, Default)]
pub struct StepReport {
    pub sources: Vec<Source>,
    pub triggered: BTreeSet<String>,
    pub commands: usize,
    pub outcomes: Vec<AppOutcome>,
}

/// Durable part of a watcher.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WatcherState {
    pub digest: SourceDigest,
    pub committed: BTreeMap<String, Committed>,
    pub degraded: BTreeSet<String>,
    #[serde(default)]
    pub issues: BTreeMap<String, AppIssue>,
    #[serde(default)]
    pub cluster: Option<ClusterState>,
    #[serde(default)]
    pub tick: u64,
}

pub struct Watcher {
    reconciler: Reconciler<DynBackend>,
    repo: Box<dyn AppRepository>,
    reports: Box<dyn ReportSource>,
    queue: CommandQueue,
    digest: SourceDigest,
    strategy: Strategy,
    snapshot: Option<InfrastructureSnapshot>,
    specs: BTreeMap<String, ApplicationSpec>,
    pending: BTreeSet<String>,
    issues: BTreeMap<String, AppIssue>,
    removals: Vec<AppOutcome>,
    reasoning_steps: u64,
    schedule: Schedule,
}

impl Watcher {
    pub fn new(
        backend: DynBackend,
        repo: Box<dyn AppRepository>,
        reports: Box<dyn ReportSource>,
        queue: CommandQueue,
        periods: WatcherPeriods,
    ) -> Self {
        Self::with_reconciler(Reconciler::new(backend), repo, reports, queue, periods)
    }

    fn with_reconciler(
        reconciler: Reconciler<DynBackend>,
        repo: Box<dyn AppRepository>,
        reports: Box<dyn ReportSource>,
        queue: CommandQueue,
        periods: WatcherPeriods,
    ) -> Self {
        Self {
            reconciler,
            repo,
            reports,
            queue,
            digest: SourceDigest::default(),
            strategy: Strategy::Continuous,
            snapshot: None,
            specs: BTreeMap::new(),
            pending: BTreeSet::new(),
            issues: BTreeMap::new(),
            removals: Vec::new(),
            reasoning_steps: 0,
            schedule: Schedule::new(periods),
        }
    }

    /// Resumes from persisted state. The backend must already reflect
    /// `state.cluster`. Specs come from the commitments until the files are
    /// next read; the report is re-read on the next infra check without
    /// triggering.
    pub fn restore(
        state: WatcherState,
        backend: DynBackend,
        repo: Box<dyn AppRepository>,
        reports: Box<dyn ReportSource>,
        queue: CommandQueue,
        periods: WatcherPeriods,
    ) -> Self {
        let specs = state.committed.iter().map(|(a, c)| (a.clone(), c.spec.clone())).collect();
        let mut reconciler = Reconciler::restore(backend, state.committed, state.degraded);
        reconciler.set_tick(state.tick);
        let mut w = Self::with_reconciler(reconciler, repo, reports, queue, periods);
        w.specs = specs;
        w.digest = state.digest;
        // Specs are only kept for committed apps; the others are re-read.
        let specs = &w.specs;
        w.digest.apps.retain(|app, _| specs.contains_key(app));
        w.issues = state.issues;
        w
    }

    pub fn state(&self) -> WatcherState {
        WatcherState {
            digest: self.digest.clone(),
            committed: self.reconciler.committed().clone(),
            degraded: self.reconciler.degraded().clone(),
            issues: self.issues.clone(),
            cluster: self.reconciler.backend().cluster_state(),
            tick: self.reconciler.tick(),
        }
    }

    pub fn reconciler(&self) -> &Reconciler<DynBackend> {
        &self.reconciler
    }

    pub fn reconciler_mut(&mut self) -> &mut Reconciler<DynBackend> {
        &mut self.reconciler
    }

    pub fn repository(&self) -> &dyn AppRepository {
        self.repo.as_ref()
    }

    pub fn repository_mut(&mut self) -> &mut dyn AppRepository {
        self.repo.as_mut()
    }

    pub fn queue(&self) -> &CommandQueue {
        &self.queue
    }

    pub fn digest(&self) -> &SourceDigest {
        &self.digest
    }

    pub fn snapshot(&self) -> Option<&InfrastructureSnapshot> {
        self.snapshot.as_ref()
    }

    pub fn spec(&self, app_id: &str) -> Option<&ApplicationSpec> {
        self.specs.get(app_id)
    }

    pub fn issues(&self) -> &BTreeMap<String, AppIssue> {
        &self.issues
    }

    pub fn pending(&self) -> &BTreeSet<String> {
        &self.pending
    }

    /// Reasoning steps run since construction.
    pub fn reasoning_steps(&self) -> u64 {
        self.reasoning_steps
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn set_strategy(&mut self, strategy: Strategy) {
        self.strategy = strategy;
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn set_periods(&mut self, periods: WatcherPeriods) {
        self.schedule.set_periods(periods);
    }

    pub fn set_tick(&mut self, tick: u64) {
        self.reconciler.set_tick(tick);
    }

    pub fn managed_apps(&self) -> Vec<String> {
        self.repo.apps()
    }

    /// Re-hashes one application's files; a change refreshes the cached
    /// spec and marks the app pending before the digest is stored.
    fn check_app(&mut self, app_id: &str) -> bool {
        let files = match self.repo.read(app_id) {
            Ok(f) => f,
            Err(e) => {
                log::warn!("{app_id}: cannot read descriptors: {e}");
                self.issues.insert(app_id.to_owned(), AppIssue::FileUnreadable(e.to_string()));
                return false;
            }
        };
        if matches!(self.issues.get(app_id), Some(AppIssue::FileUnreadable(_))) {
            self.issues.remove(app_id);
        }
        let digest = files.digest();
        if self.digest.apps.get(app_id) == Some(&digest) {
            return false;
        }
        match load_spec(app_id, &files.compose, files.requirements.as_deref()) {
            Ok(spec) => {
                self.specs.insert(app_id.to_owned(), spec);
                self.issues.remove(app_id);
            }
            Err(e) => {
                log::warn!("{app_id}: {e}");
                self.specs.remove(app_id);
                self.issues.insert(app_id.to_owned(), AppIssue::MalformedDescriptor(e.to_string()));
            }
        }
        self.pending.insert(app_id.to_owned());
        self.digest.apps.insert(app_id.to_owned(), digest);
        true
    }

    /// Hashes every managed application's descriptor files.
    pub fn tick_pipeline(&mut self) -> BTreeSet<String> {
        self.repo.apps().into_iter().filter(|app| self.check_app(app)).collect()
    }

    /// Hashes the latest report; a new one triggers every managed app.
    pub fn tick_infra(&mut self) -> bool {
        let bytes = match self.reports.latest() {
            Ok(Some(b)) => b,
            Ok(None) => return false,
            Err(e) => {
                log::warn!("cannot read infrastructure report: {e}");
                return false;
            }
        };
        let hash = sha256_hex(&bytes);
        let seen = self.digest.infra_report.as_deref() == Some(hash.as_str());
        if seen && self.snapshot.is_some() {
            return false;
        }
        match parse_report(&bytes) {
            Ok(snapshot) => self.snapshot = Some(snapshot),
            Err(e) => log::warn!("ignoring infrastructure report: {e}"),
        }
        if seen {
            return false;
        }
        let ok = self.snapshot.is_some();
        if ok {
            self.pending.extend(self.repo.apps());
        }
        self.digest.infra_report = Some(hash);
        ok
    }

    /// Applications whose backend placement drifted from the desired one.
    /// Their stored placement is replaced by the actual one and they are
    /// re-reasoned.
    pub fn tick_placement(&mut self) -> BTreeSet<String> {
        let apps: Vec<String> = self.reconciler.committed().keys().cloned().collect();
        let mut drifted = BTreeSet::new();
        for app in apps {
            if self.reconciler.matches_backend(&app) == Some(false) {
                log::info!("{app}: desired and current placement differ");
                self.reconciler.adopt_backend_placement(&app);
                self.pending.insert(app.clone());
                drifted.insert(app);
            }
        }
        drifted
    }

    fn known(&self, app_id: &str) -> bool {
        self.repo.contains(app_id) || self.reconciler.placement(app_id).is_some()
    }

    /// Drains the command queue and returns how many commands were taken.
    pub fn tick_commands(&mut self) -> usize {
        let commands = self.queue.drain();
        for command in &commands {
            let app = command.app_id();
            if !self.known(app) {
                log::warn!("discarding {command:?}: unknown application");
                continue;
            }
            match command {
                Command::UpdateFiles { files, .. } => match self.repo.write(app, files) {
                    Ok(()) => {
                        self.check_app(app);
                    }
                    Err(e) => {
                        log::warn!("{app}: cannot write descriptors: {e}");
                        self.issues.insert(app.to_owned(), AppIssue::FileUnreadable(e.to_string()));
                    }
                },
                Command::ExecApp { .. } => {
                    self.pending.insert(app.to_owned());
                }
                Command::RemoveApp { .. } => {
                    let outcome = self.remove_app(app);
                    self.removals.push(outcome);
                }
            }
        }
        commands.len()
    }

    /// Whole-application removal; the app stops being managed.
    pub fn remove_app(&mut self, app_id: &str) -> AppOutcome {
        self.pending.remove(app_id);
        let empty;
        let snapshot = match &self.snapshot {
            Some(s) => s,
            None => {
                empty = InfrastructureSnapshot::new(0, [], []).expect("empty snapshot");
                &empty
            }
        };
        let outcome = self.reconciler.remove_app(app_id, snapshot);
        if outcome.error.is_none() {
            self.repo.forget(app_id);
            self.digest.apps.remove(app_id);
            self.specs.remove(app_id);
            self.issues.remove(app_id);
        }
        outcome
    }

    /// Marks an application for a reasoning step.
    pub fn request(&mut self, app_id: &str) -> bool {
        let known = self.known(app_id);
        if known {
            self.pending.insert(app_id.to_owned());
        }
        known
    }

    /// Re-reads one application's files, then marks it for a reasoning step.
    pub fn refresh(&mut self, app_id: &str) -> bool {
        if self.repo.contains(app_id) {
            self.check_app(app_id);
        }
        self.request(app_id)
    }

    /// One reasoning step per pending application, in ascending id order.
    /// Without a report nothing can be decided and apps stay pending.
    pub fn run_pending(&mut self) -> Vec<AppOutcome> {
        let Some(snapshot) = self.snapshot.clone() else {
            if !self.pending.is_empty() {
                log::info!("no infrastructure report yet; {} app(s) waiting", self.pending.len());
            }
            return Vec::new();
        };
        let pending = std::mem::take(&mut self.pending);
        for app in &pending {
            if !self.digest.apps.contains_key(app) {
                self.check_app(app);
            }
        }
        self.pending.clear();
        let ready: BTreeSet<String> = pending.into_iter().filter(|a| self.specs.contains_key(a)).collect();
        let outcomes = self.reconciler.reconcile_tick(&ready, &self.specs, &snapshot, self.strategy);
        self.reasoning_steps += outcomes.len() as u64;
        outcomes
    }

    /// Runs the given sources, then the pending reasoning steps.
    pub fn poll(&mut self, sources: &[Source]) -> StepReport {
        let mut report = StepReport {
            sources: sources.to_vec(),
            ..StepReport::default()
        };
        for source in sources {
            match source {
                Source::Files => report.triggered.extend(self.tick_pipeline()),
                Source::Infra => {
                    if self.tick_infra() {
                        report.triggered.extend(self.repo.apps());
                    }
                }
                Source::Placement => report.triggered.extend(self.tick_placement()),
                Source::Commands => report.commands += self.tick_commands(),
            }
        }
        report.outcomes = std::mem::take(&mut self.removals);
        report.outcomes.extend(self.run_pending());
        report
    }

    /// Runs whichever sources are due at logical time `now`.
    pub fn step(&mut self, now: f64) -> StepReport {
        let due = self.schedule.due(now);
        for &s in &due {
            self.schedule.mark(s, now);
        }
        self.poll(&due)
    }
}

impl std::fmt::Debug for Watcher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Watcher")
            .field("apps", &self.repo.apps())
            .field("pending", &self.pending)
            .field("reasoning_steps", &self.reasoning_steps)
            .finish_non_exhaustive()
    }
}
