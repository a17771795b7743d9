use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{render_compose, render_requirements, ApplicationSpec, WatcherPeriods};
use crate::reconciler::{SimulatedBackend, Strategy};
use crate::watcher::{AppFiles, CommandQueue, MemoryRepository, SharedReport, Source, Watcher};

use super::{build_testbed_with, demo_topology, substream, CommitModel, DynamicsError, PerturbationModel, SimulatedWorld, TestbedParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub nodes: usize,
    pub regions: usize,
    pub apps: usize,
    pub services_per_app: usize,
    pub duration_ticks: u64,
    pub seed: u64,
    pub strategy: Strategy,
    pub testbed: TestbedParams,
    pub perturbation: PerturbationModel,
    pub commits: CommitModel,
    /// Chance that an application receives a new commit in a tick.
    pub commit_probability: f64,
    pub sensitivity: f64,
    pub restructure_every: u64,
    /// Record decision wall times. Off by default so that logs of equal
    /// seeds are byte-identical.
    pub wall_clock: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            nodes: 15,
            regions: 3,
            apps: 10,
            services_per_app: 8,
            duration_ticks: 300,
            seed: 0,
            strategy: Strategy::Continuous,
            testbed: TestbedParams::default(),
            perturbation: PerturbationModel::default(),
            commits: CommitModel::default(),
            commit_probability: 0.1,
            sensitivity: 0.1,
            restructure_every: 10,
            wall_clock: false,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: String| Err(DynamicsError::ConfigInvalid(m));
        if self.regions == 0 || self.nodes < self.regions {
            return bad(format!("{} nodes cannot fill {} regions", self.nodes, self.regions));
        }
        if self.apps == 0 {
            return bad("at least one application is needed".into());
        }
        if self.services_per_app != 8 {
            return bad(format!("the demo application has 8 services, not {}", self.services_per_app));
        }
        if !(0.0..=1.0).contains(&self.commit_probability) {
            return bad(format!("commit_probability {} not in [0,1]", self.commit_probability));
        }
        if !(self.sensitivity > 0.0 && self.sensitivity < 1.0) {
            return bad(format!("sensitivity {} not in (0,1)", self.sensitivity));
        }
        if self.restructure_every == 0 {
            return bad("restructure_every must be positive".into());
        }
        self.perturbation.validate().map_err(DynamicsError::ConfigInvalid)?;
        self.commits.validate().map_err(DynamicsError::ConfigInvalid)
    }

    pub fn app_ids(&self) -> Vec<String> {
        let width = self.apps.saturating_sub(1).to_string().len().max(2);
        (0..self.apps).map(|i| format!("app{i:0width$}")).collect()
    }
}

/// One application in one tick; tick 0 is the initial deployment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub app_id: String,
    pub deploys: usize,
    pub migrations: usize,
    pub removals: usize,
    pub explored: u64,
    pub decision_ms: Option<f64>,
    pub fallback: bool,
    pub unplaceable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub strategy: Strategy,
    pub seed: u64,
    pub nodes: usize,
    pub apps: usize,
    pub ticks: u64,
    pub deploys: usize,
    pub migrations: usize,
    pub removals: usize,
    pub explored: u64,
    pub fallbacks: usize,
    pub unplaceable: usize,
    /// Migrations after the initial deployment, per tick.
    pub mean_migrations_per_tick: f64,
    /// Candidate assignments explored after the initial deployment, per tick.
    pub mean_explored_per_tick: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioLog {
    pub config: ScenarioConfig,
    pub records: Vec<TickRecord>,
}

impl ScenarioLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> ScenarioSummary {
        let c = &self.config;
        let later = || self.records.iter().filter(|r| r.tick > 0);
        let per_tick = |x: f64| if c.duration_ticks == 0 { 0.0 } else { x / c.duration_ticks as f64 };
        ScenarioSummary {
            strategy: c.strategy,
            seed: c.seed,
            nodes: c.nodes,
            apps: c.apps,
            ticks: c.duration_ticks,
            deploys: self.records.iter().map(|r| r.deploys).sum(),
            migrations: self.records.iter().map(|r| r.migrations).sum(),
            removals: self.records.iter().map(|r| r.removals).sum(),
            explored: self.records.iter().map(|r| r.explored).sum(),
            fallbacks: self.records.iter().filter(|r| r.fallback).count(),
            unplaceable: self.records.iter().filter(|r| r.unplaceable).count(),
            mean_migrations_per_tick: per_tick(later().map(|r| r.migrations).sum::<usize>() as f64),
            mean_explored_per_tick: per_tick(later().map(|r| r.explored).sum::<u64>() as f64),
        }
    }

    pub fn summary_csv(&self) -> String {
        let s = self.summary();
        let strategy = match s.strategy {
            Strategy::Continuous => "cr",
            Strategy::ExhaustiveRestart => "ex",
        };
        let mut out = String::from(
            "strategy,seed,nodes,apps,ticks,deploys,migrations,removals,explored,fallbacks,unplaceable,mean_migrations_per_tick,mean_explored_per_tick\n",
        );
        writeln!(
            out,
            "{strategy},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.seed,
            s.nodes,
            s.apps,
            s.ticks,
            s.deploys,
            s.migrations,
            s.removals,
            s.explored,
            s.fallbacks,
            s.unplaceable,
            s.mean_migrations_per_tick,
            s.mean_explored_per_tick
        )
        .expect("writing to a string");
        out
    }
}

fn files_of(spec: &ApplicationSpec) -> AppFiles {
    AppFiles::new(render_compose(&spec.images), Some(render_requirements(&spec.services)))
}

/// Runs the whole loop for `duration_ticks` monitoring periods: perturb the
/// testbed, let the overlay publish, commit new descriptors at random, and
/// let the watcher trigger reasoning and reconciliation.
///
/// World and commit randomness come from their own substreams, so runs of
/// either strategy with the same seed see identical inputs.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioLog, DynamicsError> {
    config.validate()?;
    let baseline = build_testbed_with(config.nodes, config.regions, &config.testbed)?;
    let mut world = SimulatedWorld::new(
        baseline,
        config.perturbation.clone(),
        true,
        config.seed,
        config.sensitivity,
        config.restructure_every,
    );
    let mut commit_rng = substream(config.seed, "commits");
    let mut inclusion_rng = substream(config.seed, "inclusion");

    let repo = MemoryRepository::new();
    let mut templates = BTreeMap::new();
    for app in config.app_ids() {
        let template = demo_topology(&app);
        let inclusion = config.commits.draw_inclusion(&template, &mut inclusion_rng);
        repo.insert(app.clone(), files_of(&config.commits.initial(&template, &mut commit_rng)));
        templates.insert(app, (template, inclusion));
    }
    let report = SharedReport::new();
    let mut watcher = Watcher::new(
        Box::new(SimulatedBackend::new()),
        Box::new(repo.clone()),
        Box::new(report.clone()),
        CommandQueue::new(),
        WatcherPeriods::default(),
    );
    watcher.set_strategy(config.strategy);

    let mut records = Vec::new();
    for tick in 0..=config.duration_ticks {
        if tick > 0 {
            for (app, (template, inclusion)) in &templates {
                if commit_rng.random_bool(config.commit_probability) {
                    let commit = config.commits.generate_commit(template, inclusion, &mut commit_rng);
                    repo.insert(app.clone(), files_of(&commit));
                }
            }
        }
        if let Some(r) = world.advance() {
            report.publish(r);
        }
        watcher.set_tick(tick);
        let step = watcher.poll(&Source::ALL);
        let outcomes: BTreeMap<&str, _> = step.outcomes.iter().map(|o| (o.app_id.as_str(), o)).collect();
        for app in templates.keys() {
            let rec = match outcomes.get(app.as_str()) {
                Some(o) => TickRecord {
                    tick,
                    app_id: app.clone(),
                    deploys: o.plan.deploy.len(),
                    migrations: o.plan.migrate.len(),
                    removals: o.plan.remove.len(),
                    explored: o.explored(),
                    decision_ms: config.wall_clock.then(|| o.decision_time.as_secs_f64() * 1e3),
                    fallback: o.reasoning.as_ref().is_some_and(|r| r.fallback_used),
                    unplaceable: o.unplaceable.is_some(),
                },
                None => TickRecord {
                    tick,
                    app_id: app.clone(),
                    deploys: 0,
                    migrations: 0,
                    removals: 0,
                    explored: 0,
                    decision_ms: None,
                    fallback: false,
                    unplaceable: false,
                },
            };
            records.push(rec);
        }
    }
    Ok(ScenarioLog {
        config: config.clone(),
        records,
    })
}
