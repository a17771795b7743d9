//! From placements to executed actions.
//!
//! The [`Reconciler`] is the single owner of committed placements and of the
//! shared [`AllocationLedger`]; reasoning for several applications within one
//! tick runs sequentially in ascending `app_id` order, so later applications
//! see the allocations of earlier ones.

mod backend;
mod plan;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AllocationLedger, ApplicationSpec, InfrastructureSnapshot, NodeId, Placement, ServiceId};
use crate::reasoner::{continuous_step, full_search, ReasoningOutcome, Unplaceable};

pub use backend::{Backend, BackendError, ClusterState, CommandScriptBackend, FailureHook, SimulatedBackend};
pub use plan::{
    constraint_add, constraint_rm, diff, docker_service_name, render_action, render_commands, Action, ActionPlan,
    Migration,
};

/// How a reasoning step treats the previous placement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Re-place only services in need of attention.
    #[default]
    Continuous,
    /// Search from scratch every time, ignoring the current deployment.
    ExhaustiveRestart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApplyReport {
    pub app_id: String,
    pub completed: Vec<Action>,
    pub commands: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApplyError {
    #[error("backend failed on {action:?}: {cause}")]
    BackendFailure {
        action: Action,
        cause: BackendError,
        completed: Vec<Action>,
    },
    #[error("applying the plan would oversubscribe node `{node}` ({used} > {free})")]
    Oversubscribed { node: NodeId, used: u64, free: u64 },
}

/// What is committed for one application.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Committed {
    pub spec: ApplicationSpec,
    pub placement: Placement,
}

/// Result of one application's reasoning + reconciliation.
#[derive(Clone, Debug, PartialEq)]
pub struct AppOutcome {
    pub app_id: String,
    pub plan: ActionPlan,
    pub reasoning: Option<ReasoningOutcome>,
    pub unplaceable: Option<Unplaceable>,
    pub error: Option<ApplyError>,
    /// Reasoning plus diff, excluding backend actuation.
    pub decision_time: Duration,
}

impl AppOutcome {
    pub fn degraded(&self) -> bool {
        self.unplaceable.is_some() || self.error.is_some()
    }

    pub fn explored(&self) -> u64 {
        self.reasoning
            .as_ref()
            .map(|r| r.stats.candidate_assignments_explored)
            .or_else(|| self.unplaceable.as_ref().map(|u| u.stats.candidate_assignments_explored))
            .unwrap_or(0)
    }
}

pub struct Reconciler<B> {
    backend: B,
    ledger: AllocationLedger,
    committed: BTreeMap<String, Committed>,
    degraded: BTreeSet<String>,
    tick: u64,
}

impl<B: Backend> Reconciler<B> {
    pub fn new(backend: B) -> Self {
        Self {
            backend,
            ledger: AllocationLedger::new(),
            committed: BTreeMap::new(),
            degraded: BTreeSet::new(),
            tick: 0,
        }
    }

    /// Rebuilds from persisted commitments; the ledger is recomputed.
    pub fn restore(backend: B, committed: BTreeMap<String, Committed>, degraded: BTreeSet<String>) -> Self {
        let mut r = Self::new(backend);
        r.committed = committed;
        r.degraded = degraded;
        r.ledger = r.recomputed_ledger();
        r
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn backend_mut(&mut self) -> &mut B {
        &mut self.backend
    }

    pub fn ledger(&self) -> &AllocationLedger {
        &self.ledger
    }

    pub fn committed(&self) -> &BTreeMap<String, Committed> {
        &self.committed
    }

    pub fn placement(&self, app_id: &str) -> Option<&Placement> {
        self.committed.get(app_id).map(|c| &c.placement)
    }

    pub fn degraded(&self) -> &BTreeSet<String> {
        &self.degraded
    }

    pub fn is_degraded(&self, app_id: &str) -> bool {
        self.degraded.contains(app_id)
    }

    pub fn set_tick(&mut self, tick: u64) {
        self.tick = tick;
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Summed allocations of every committed application except `app_id`.
    pub fn external_for(&self, app_id: &str) -> AllocationLedger {
        let mut ledger = AllocationLedger::new();
        for (id, c) in &self.committed {
            if id != app_id {
                ledger.charge(&c.spec, &c.placement);
            }
        }
        ledger
    }

    /// The ledger recomputed from scratch over all commitments.
    pub fn recomputed_ledger(&self) -> AllocationLedger {
        self.external_for("")
    }

    pub fn ledger_consistent(&self) -> bool {
        self.ledger.approx_eq(&self.recomputed_ledger(), 1e-6)
    }

    fn hardware_of(old: Option<&Committed>, new: Option<&ApplicationSpec>, service: &ServiceId) -> u64 {
        new.and_then(|s| s.services.get(service))
            .or_else(|| old.and_then(|c| c.spec.services.get(service)))
            .map_or(0, |r| r.hardware)
    }

    /// Checks that no phase (removals, migrations, deployments) pushes a
    /// node it adds load to beyond its free hardware.
    fn preflight(
        &self,
        plan: &ActionPlan,
        new_spec: Option<&ApplicationSpec>,
        snapshot: &InfrastructureSnapshot,
    ) -> Result<(), ApplyError> {
        let old = self.committed.get(&plan.app_id);
        let external = self.external_for(&plan.app_id);
        let load = |p: &Placement| {
            let mut per_node: BTreeMap<NodeId, u64> = BTreeMap::new();
            for (s, n) in &p.assignment {
                *per_node.entry(n.clone()).or_insert(0) += Self::hardware_of(old, new_spec, s);
            }
            per_node
        };
        let mut current = old.map(|c| c.placement.clone()).unwrap_or_else(|| Placement::new(plan.app_id.clone()));
        let mut before = load(&current);
        let phases: [&dyn Fn(&mut Placement); 3] = [
            &|p| plan.remove.iter().for_each(|s| {
                p.assignment.remove(s);
            }),
            &|p| plan.migrate.iter().for_each(|m| {
                p.assignment.insert(m.service.clone(), m.to.clone());
            }),
            &|p| plan.deploy.iter().for_each(|(s, n)| {
                p.assignment.insert(s.clone(), n.clone());
            }),
        ];
        for phase in phases {
            phase(&mut current);
            let after = load(&current);
            for (node, &used) in &after {
                if used <= before.get(node).copied().unwrap_or(0) {
                    continue;
                }
                let free = snapshot.node(node.as_str()).map_or(0, |n| n.free_hw);
                let total = used + external.hw(node.as_str());
                if total > free {
                    return Err(ApplyError::Oversubscribed {
                        node: node.clone(),
                        used: total,
                        free,
                    });
                }
            }
            before = after;
        }
        Ok(())
    }

    /// Executes `plan` (removals, then migrations, then deployments) and
    /// commits `new_spec` with the resulting placement. `new_spec = None`
    /// uncommits the application. On failure nothing is committed and the
    /// ledger is left untouched.
    pub fn apply(
        &mut self,
        plan: &ActionPlan,
        new_spec: Option<&ApplicationSpec>,
        snapshot: &InfrastructureSnapshot,
    ) -> Result<ApplyReport, ApplyError> {
        if !plan.remove_stack {
            self.preflight(plan, new_spec, snapshot)?;
        }
        let actions = plan.actions();
        let mut completed = Vec::with_capacity(actions.len());
        if !actions.is_empty() {
            let fail = |action: &Action, cause, completed: &Vec<Action>| ApplyError::BackendFailure {
                action: action.clone(),
                cause,
                completed: completed.clone(),
            };
            if let Err(cause) = self.backend.begin_plan(self.tick, &plan.app_id) {
                return Err(fail(&actions[0], cause, &completed));
            }
            for action in &actions {
                if let Err(cause) = self.backend.apply_action(&plan.app_id, action) {
                    let _ = self.backend.end_plan(false);
                    return Err(fail(action, cause, &completed));
                }
                completed.push(action.clone());
            }
            if let Err(cause) = self.backend.end_plan(true) {
                return Err(fail(actions.last().expect("non-empty"), cause, &completed));
            }
        }

        let old = self.committed.remove(&plan.app_id);
        let target = plan.apply_to(old.as_ref().map(|c| &c.placement));
        if let Some(old) = &old {
            self.ledger.release(&old.spec, &old.placement);
        }
        match new_spec {
            Some(spec) if !plan.remove_stack => {
                self.ledger.charge(spec, &target);
                self.committed.insert(
                    plan.app_id.clone(),
                    Committed {
                        spec: spec.clone(),
                        placement: target,
                    },
                );
            }
            _ => {
                self.degraded.remove(&plan.app_id);
            }
        }
        Ok(ApplyReport {
            app_id: plan.app_id.clone(),
            completed,
            commands: render_commands(plan),
        })
    }

    /// Reasoning step for one application followed by reconciliation.
    pub fn reason(&mut self, spec: &ApplicationSpec, snapshot: &InfrastructureSnapshot, strategy: Strategy) -> AppOutcome {
        let app_id = spec.app_id.clone();
        let external = self.external_for(&app_id);
        let previous = self.placement(&app_id).cloned();
        let started = Instant::now();
        let result = match strategy {
            Strategy::Continuous => continuous_step(spec, previous.as_ref(), snapshot, &external),
            Strategy::ExhaustiveRestart => full_search(spec, snapshot, &external),
        };
        match result {
            Ok(reasoning) => {
                let plan = diff(previous.as_ref(), &reasoning.placement);
                let decision_time = started.elapsed();
                let error = self.apply(&plan, Some(spec), snapshot).err();
                if error.is_some() {
                    self.degraded.insert(app_id.clone());
                } else {
                    self.degraded.remove(&app_id);
                }
                AppOutcome {
                    app_id,
                    plan,
                    reasoning: Some(reasoning),
                    unplaceable: None,
                    error,
                    decision_time,
                }
            }
            Err(unplaceable) => {
                let decision_time = started.elapsed();
                log::warn!("{unplaceable}");
                self.degraded.insert(app_id.clone());
                AppOutcome {
                    plan: ActionPlan::empty(app_id.clone()),
                    app_id,
                    reasoning: None,
                    unplaceable: Some(unplaceable),
                    error: None,
                    decision_time,
                }
            }
        }
    }

    /// Whole-application removal (`docker stack rm`).
    pub fn remove_app(&mut self, app_id: &str, snapshot: &InfrastructureSnapshot) -> AppOutcome {
        let started = Instant::now();
        let plan = ActionPlan::stack_removal(app_id, self.placement(app_id));
        let decision_time = started.elapsed();
        let error = self.apply(&plan, None, snapshot).err();
        AppOutcome {
            app_id: app_id.to_owned(),
            plan,
            reasoning: None,
            unplaceable: None,
            error,
            decision_time,
        }
    }

    /// Reasons about each app of `apps` in ascending order. Apps with no
    /// spec in `specs` are removed as a whole.
    pub fn reconcile_tick(
        &mut self,
        apps: &BTreeSet<String>,
        specs: &BTreeMap<String, ApplicationSpec>,
        snapshot: &InfrastructureSnapshot,
        strategy: Strategy,
    ) -> Vec<AppOutcome> {
        let out = apps
            .iter()
            .map(|app| match specs.get(app) {
                Some(spec) => self.reason(spec, snapshot, strategy),
                None => self.remove_app(app, snapshot),
            })
            .collect();
        debug_assert!(self.ledger_consistent(), "ledger drifted from commitments");
        out
    }

    /// Whether the backend runs what was committed.
    pub fn matches_backend(&self, app_id: &str) -> Option<bool> {
        let desired = self.placement(app_id)?;
        let current = self.backend.current_placement(app_id).unwrap_or_default();
        Some(current.assignment == desired.assignment)
    }

    /// Discards the committed placement of `app_id` in favour of what the
    /// backend actually runs, so the next reasoning step starts from reality.
    pub fn adopt_backend_placement(&mut self, app_id: &str) {
        let Some(mut c) = self.committed.remove(app_id) else { return };
        self.ledger.release(&c.spec, &c.placement);
        let mut current = self.backend.current_placement(app_id).unwrap_or_else(|| Placement::new(app_id));
        current.app_id = app_id.to_owned();
        c.placement = current;
        self.ledger.charge(&c.spec, &c.placement);
        self.committed.insert(app_id.to_owned(), c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinkState, NodeState, ServiceRequirement};

    fn snap(nodes: &[(&str, u64)]) -> InfrastructureSnapshot {
        let mut links = Vec::new();
        for (a, _) in nodes {
            for (b, _) in nodes {
                if a != b {
                    links.push(LinkState::new(*a, *b, 1.0, 100.0));
                }
            }
        }
        InfrastructureSnapshot::new(0, nodes.iter().map(|(n, hw)| NodeState::new(*n, *hw)), links).unwrap()
    }

    fn spec(app: &str, services: &[(&str, u64)]) -> ApplicationSpec {
        ApplicationSpec::new(
            app,
            services
                .iter()
                .map(|(s, hw)| ServiceRequirement::unconstrained(*s).with_hardware(*hw)),
        )
        .unwrap()
    }

    #[test]
    fn empty_plan_makes_no_backend_calls() {
        let mut r = Reconciler::new(SimulatedBackend::new());
        r.backend_mut()
            .set_failure_hook(Some(Box::new(|_, _| Some("must not be called".into()))));
        let report = r
            .apply(&ActionPlan::empty("app"), Some(&spec("app", &[])), &snap(&[("n1", 1)]))
            .unwrap();
        assert!(report.completed.is_empty());
        assert_eq!(r.ledger(), &AllocationLedger::new());
    }

    #[test]
    fn remove_first_frees_capacity() {
        let world = snap(&[("n1", 10)]);
        let mut r = Reconciler::new(SimulatedBackend::new());
        let v1 = spec("app", &[("c", 10)]);
        let first = r.reason(&v1, &world, Strategy::Continuous);
        assert!(!first.degraded());
        // c is dropped and d, needing exactly c's share, lands on the same node.
        let v2 = spec("app", &[("d", 10)]);
        let out = r.reason(&v2, &world, Strategy::Continuous);
        assert!(out.error.is_none(), "{:?}", out.error);
        assert_eq!(out.plan.remove, vec![ServiceId::from("c")]);
        assert_eq!(out.plan.deploy, vec![("d".into(), "n1".into())]);
        assert_eq!(r.ledger().hw("n1"), 10);

        // Deploying d while c still runs would need 20 MB on n1.
        let mut deploy_first = ActionPlan::empty("app");
        deploy_first.deploy.push(("e".into(), "n1".into()));
        let v3 = spec("app", &[("d", 10), ("e", 10)]);
        assert!(matches!(
            r.apply(&deploy_first, Some(&v3), &world),
            Err(ApplyError::Oversubscribed { .. })
        ));
    }

    #[test]
    fn swap_migration_is_allowed() {
        let world = snap(&[("n1", 5), ("n2", 5)]);
        let mut r = Reconciler::new(SimulatedBackend::new());
        let s = spec("app", &[("a", 5), ("b", 5)]);
        let mut plan = ActionPlan::empty("app");
        plan.deploy = vec![("a".into(), "n1".into()), ("b".into(), "n2".into())];
        r.apply(&plan, Some(&s), &world).unwrap();
        let swap = diff(r.placement("app"), &Placement::new("app").with("a", "n2").with("b", "n1"));
        r.apply(&swap, Some(&s), &world).unwrap();
        assert_eq!(r.placement("app").unwrap().node_of("a").unwrap().as_str(), "n2");
    }

    #[test]
    fn backend_failure_rolls_back() {
        let world = snap(&[("n1", 10), ("n2", 10)]);
        let mut r = Reconciler::new(SimulatedBackend::new());
        let s = spec("app", &[("a", 4), ("b", 4)]);
        let mut plan = ActionPlan::empty("app");
        plan.deploy = vec![("a".into(), "n1".into()), ("b".into(), "n1".into())];
        r.apply(&plan, Some(&s), &world).unwrap();
        let before = r.ledger().clone();

        r.backend_mut().set_failure_hook(Some(Box::new(|_, a| {
            matches!(a, Action::Migrate { service, .. } if service.as_str() == "b").then(|| "node drained".into())
        })));
        let target = Placement::new("app").with("a", "n2").with("b", "n2");
        let plan = diff(r.placement("app"), &target);
        let err = r.apply(&plan, Some(&s), &world).unwrap_err();
        let ApplyError::BackendFailure { completed, .. } = err else { panic!() };
        assert_eq!(completed.len(), 1);
        assert_eq!(r.ledger(), &before);
        assert_eq!(r.placement("app").unwrap().node_of("b").unwrap().as_str(), "n1");
        assert_eq!(r.matches_backend("app"), Some(false));
    }

    #[test]
    fn lower_app_id_wins_contention() {
        let world = snap(&[("n1", 10), ("n2", 4)]);
        let mut r = Reconciler::new(SimulatedBackend::new());
        let specs: BTreeMap<String, ApplicationSpec> = [spec("a", &[("s", 8)]), spec("b", &[("s", 8)])]
            .into_iter()
            .map(|s| (s.app_id.clone(), s))
            .collect();
        let apps: BTreeSet<String> = specs.keys().cloned().collect();
        let out = r.reconcile_tick(&apps, &specs, &world, Strategy::Continuous);
        assert!(!out[0].degraded());
        assert!(out[1].unplaceable.is_some());
        assert!(r.is_degraded("b"));
        assert_eq!(r.placement("a").unwrap().node_of("s").unwrap().as_str(), "n1");
        assert!(r.ledger_consistent());
    }

    #[test]
    fn deleted_spec_removes_stack() {
        let world = snap(&[("n1", 10)]);
        let mut r = Reconciler::new(SimulatedBackend::new());
        let mut specs = BTreeMap::from([("a".to_string(), spec("a", &[("s", 2)]))]);
        let apps = BTreeSet::from(["a".to_string()]);
        r.reconcile_tick(&apps, &specs, &world, Strategy::Continuous);
        let quiet = r.reconcile_tick(&apps, &specs, &world, Strategy::Continuous);
        assert!(quiet[0].plan.is_empty());
        specs.clear();
        let out = r.reconcile_tick(&apps, &specs, &world, Strategy::Continuous);
        assert!(out[0].plan.remove_stack);
        assert_eq!(render_commands(&out[0].plan), ["docker stack rm a"]);
        assert!(r.placement("a").is_none());
        assert_eq!(r.ledger(), &AllocationLedger::new());
    }

    #[test]
    fn spec_change_without_moves_updates_ledger() {
        let world = snap(&[("n1", 10)]);
        let mut r = Reconciler::new(SimulatedBackend::new());
        r.reason(&spec("a", &[("s", 2)]), &world, Strategy::Continuous);
        let out = r.reason(&spec("a", &[("s", 6)]), &world, Strategy::Continuous);
        assert!(out.plan.is_empty());
        assert_eq!(r.ledger().hw("n1"), 6);
    }
}
