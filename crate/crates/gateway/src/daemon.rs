//! The long-running watcher process.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use chrono::Utc;
use edgearm::dynamics::SimulatedWorld;
use edgearm::model::OrchestratorConfig;
use edgearm::watcher::{write_atomic, CommandQueue, Source, StepReport, Watcher};

use crate::api::{ApiView, AppDetail, Files, SharedView};
use crate::history::History;
use crate::session::{absorb, build_watcher, build_world};
use crate::state::{AppMeta, StateFile, Store};
use crate::status::AppStatus;
use crate::GatewayError;

/// Longest sleep between two ticks, so changes made by the CLI are picked
/// up promptly even when every source is idle.
const MAX_IDLE: f64 = 0.5;

pub struct Daemon {
    config: OrchestratorConfig,
    config_path: Option<PathBuf>,
    store: Store,
    generation: u64,
    meta: BTreeMap<String, AppMeta>,
    watcher: Watcher,
    queue: CommandQueue,
    world: Option<SimulatedWorld>,
    view: SharedView,
    saved: Option<String>,
}

impl Daemon {
    /// `config_path`, when given, is re-read on every tick so period and
    /// sensitivity changes apply without a restart.
    pub fn open(config: OrchestratorConfig, config_path: Option<PathBuf>) -> Result<Self, GatewayError> {
        let store = Store::new(&config.state_dir);
        let state = {
            let guard = store.lock()?;
            store.load(&guard)?
        };
        let queue = CommandQueue::new();
        let watcher = build_watcher(&config, &state, queue.clone());
        let world = build_world(&config)?;
        let view = Arc::new(RwLock::new(ApiView {
            history: History::new(config.history_capacity),
            ..ApiView::default()
        }));
        Ok(Self {
            generation: state.generation,
            meta: state.apps,
            config,
            config_path,
            store,
            watcher,
            queue,
            world,
            view,
            saved: None,
        })
    }

    pub fn queue(&self) -> CommandQueue {
        self.queue.clone()
    }

    pub fn view(&self) -> SharedView {
        self.view.clone()
    }

    pub fn watcher(&self) -> &Watcher {
        &self.watcher
    }

    pub fn world(&self) -> Option<&SimulatedWorld> {
        self.world.as_ref()
    }

    fn advance_world(&mut self) -> Result<(), GatewayError> {
        let Some(world) = &mut self.world else { return Ok(()) };
        if let Some(report) = world.advance() {
            if let Some(dir) = self.config.report_path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            write_atomic(&self.config.report_path, report.as_bytes())?;
        }
        Ok(())
    }

    fn reload_config(&mut self) {
        let Some(path) = &self.config_path else { return };
        match OrchestratorConfig::load(path) {
            Ok(cfg) => {
                if cfg.periods != self.config.periods {
                    self.watcher.set_periods(cfg.periods);
                }
                if let Some(world) = &mut self.world {
                    world.monitor_mut().set_sensitivity(cfg.sensitivity);
                }
                self.config.periods = cfg.periods;
                self.config.sensitivity = cfg.sensitivity;
            }
            Err(e) => log::warn!("keeping previous configuration: {e}"),
        }
    }

    /// One pass: pick up state written by other processes, advance the
    /// simulated world when the report source is due, run the due watcher
    /// sources, persist and refresh the HTTP view.
    pub fn tick(&mut self, now: f64) -> Result<StepReport, GatewayError> {
        let guard = self.store.lock()?;
        let disk = self.store.load(&guard)?;
        if disk.generation != self.generation {
            log::info!("state changed on disk (generation {}), reloading", disk.generation);
            self.watcher = build_watcher(&self.config, &disk, self.queue.clone());
            self.meta = disk.apps;
            self.generation = disk.generation;
            self.saved = None;
        }
        self.reload_config();
        if self.watcher.schedule().due(now).contains(&Source::Infra) {
            self.advance_world()?;
        }
        let report = self.watcher.step(now);
        absorb(&mut self.meta, &self.watcher, &report.outcomes);

        let mut state = StateFile {
            generation: self.generation,
            watcher: Some(self.watcher.state()),
            apps: self.meta.clone(),
        };
        let body = serde_json::to_string(&(&state.watcher, &state.apps)).expect("state serializes");
        if self.saved.as_deref() != Some(body.as_str()) {
            self.generation = self.store.save(&guard, &mut state)?;
            self.saved = Some(body);
        }
        drop(guard);
        self.refresh_view();
        Ok(report)
    }

    fn refresh_view(&mut self) {
        let now = Utc::now();
        let mut apps: Vec<String> = self.watcher.managed_apps();
        apps.extend(self.watcher.reconciler().committed().keys().cloned());
        apps.sort();
        apps.dedup();
        let details: BTreeMap<String, AppDetail> = apps
            .into_iter()
            .map(|app| {
                let files = match self.watcher.repository().read(&app) {
                    Ok(f) => Files {
                        compose: Some(String::from_utf8_lossy(&f.compose).into_owned()),
                        requirements: f.requirements.map(|r| String::from_utf8_lossy(&r).into_owned()),
                    },
                    Err(_) => Files::default(),
                };
                let status = AppStatus::build(&app, &self.watcher, self.meta.get(&app), now);
                (app, AppDetail { status, files })
            })
            .collect();
        let services: usize = self.watcher.reconciler().committed().values().map(|c| c.placement.len()).sum();
        let report = std::fs::read(&self.config.report_path).ok();

        let mut view = self.view.write().unwrap_or_else(|e| e.into_inner());
        view.apps = details;
        view.report = report;
        view.snapshot = self.watcher.snapshot().cloned();
        let seq = view.snapshot.as_ref().map_or(0, |s| s.timestamp());
        if let Some(snapshot) = self.watcher.snapshot() {
            view.history.record_report(snapshot, now);
        }
        view.history.record_services(seq, services, now);
    }

    /// Seconds until the next pass should run.
    pub fn idle_for(&self, now: f64) -> f64 {
        self.watcher
            .schedule()
            .earliest_due()
            .map_or(MAX_IDLE, |due| (due - now).clamp(0.0, MAX_IDLE))
    }

    /// Ticks until `stop` is raised.
    pub fn run(&mut self, stop: &AtomicBool) {
        let start = Instant::now();
        while !stop.load(Ordering::Relaxed) {
            let now = start.elapsed().as_secs_f64();
            match self.tick(now) {
                Ok(report) => {
                    for o in &report.outcomes {
                        if !o.plan.is_empty() || o.unplaceable.is_some() || o.error.is_some() {
                            log::info!(
                                "{}: {} deploy, {} migrate, {} remove{}",
                                o.app_id,
                                o.plan.deploy.len(),
                                o.plan.migrate.len(),
                                o.plan.remove.len(),
                                if o.degraded() { " (degraded)" } else { "" }
                            );
                        }
                    }
                }
                Err(e) => log::error!("watcher tick failed: {e}"),
            }
            let idle = self.idle_for(start.elapsed().as_secs_f64());
            std::thread::sleep(Duration::from_secs_f64(idle.max(0.01)));
        }
    }
}
