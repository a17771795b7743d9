use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{NodeId, Placement, ServiceId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Migration {
    pub service: ServiceId,
    pub from: NodeId,
    pub to: NodeId,
}

/// One backend operation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Deploy { service: ServiceId, node: NodeId },
    Migrate { service: ServiceId, from: NodeId, to: NodeId },
    Remove { service: ServiceId },
    RemoveApp,
}

/// The three action lists turning one placement into another.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionPlan {
    pub app_id: String,
    pub deploy: Vec<(ServiceId, NodeId)>,
    pub migrate: Vec<Migration>,
    pub remove: Vec<ServiceId>,
    /// The whole application goes away; rendered as a single stack removal.
    pub remove_stack: bool,
}

impl ActionPlan {
    pub fn empty(app_id: impl Into<String>) -> Self {
        Self {
            app_id: app_id.into(),
            ..Self::default()
        }
    }

    /// Removal of every service of `current`.
    pub fn stack_removal(app_id: impl Into<String>, current: Option<&Placement>) -> Self {
        Self {
            app_id: app_id.into(),
            remove: current.map(|p| p.assignment.keys().cloned().collect()).unwrap_or_default(),
            remove_stack: true,
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.deploy.is_empty() && self.migrate.is_empty() && self.remove.is_empty() && !self.remove_stack
    }

    /// Actions in execution order: removals, then migrations, then deployments.
    pub fn actions(&self) -> Vec<Action> {
        if self.remove_stack {
            return vec![Action::RemoveApp];
        }
        let mut out: Vec<Action> = self
            .remove
            .iter()
            .map(|s| Action::Remove { service: s.clone() })
            .collect();
        out.extend(self.migrate.iter().map(|m| Action::Migrate {
            service: m.service.clone(),
            from: m.from.clone(),
            to: m.to.clone(),
        }));
        out.extend(self.deploy.iter().map(|(s, n)| Action::Deploy {
            service: s.clone(),
            node: n.clone(),
        }));
        out
    }

    /// Every service the plan touches.
    pub fn touched(&self) -> BTreeSet<&ServiceId> {
        self.deploy
            .iter()
            .map(|(s, _)| s)
            .chain(self.migrate.iter().map(|m| &m.service))
            .chain(self.remove.iter())
            .collect()
    }

    /// The placement obtained by executing the plan on `old`.
    pub fn apply_to(&self, old: Option<&Placement>) -> Placement {
        let mut p = old.cloned().unwrap_or_else(|| Placement::new(self.app_id.clone()));
        p.app_id = self.app_id.clone();
        if self.remove_stack {
            p.assignment.clear();
            return p;
        }
        for s in &self.remove {
            p.assignment.remove(s);
        }
        for m in &self.migrate {
            p.assignment.insert(m.service.clone(), m.to.clone());
        }
        for (s, n) in &self.deploy {
            p.assignment.insert(s.clone(), n.clone());
        }
        p
    }
}

/// Deploy what is new, remove what is gone, migrate what moved. A missing
/// `old` means every service is deployed.
pub fn diff(old: Option<&Placement>, new: &Placement) -> ActionPlan {
    let mut plan = ActionPlan::empty(new.app_id.clone());
    let empty = Placement::default();
    let old = old.unwrap_or(&empty);
    for (s, n) in &new.assignment {
        match old.assignment.get(s) {
            None => plan.deploy.push((s.clone(), n.clone())),
            Some(prev) if prev != n => plan.migrate.push(Migration {
                service: s.clone(),
                from: prev.clone(),
                to: n.clone(),
            }),
            Some(_) => {}
        }
    }
    plan.remove = old
        .assignment
        .keys()
        .filter(|s| !new.assignment.contains_key(*s))
        .cloned()
        .collect();
    plan
}

/// Docker service name of a managed service.
pub fn docker_service_name(app_id: &str, service: &ServiceId) -> String {
    format!("{app_id}_{service}")
}

pub fn constraint_add(app_id: &str, service: &ServiceId, node: &NodeId) -> String {
    format!(
        "docker service update --constraint-add node.hostname=={node} {}",
        docker_service_name(app_id, service)
    )
}

pub fn constraint_rm(app_id: &str, service: &ServiceId, node: &NodeId) -> String {
    format!(
        "docker service update --constraint-rm node.hostname=={node} {}",
        docker_service_name(app_id, service)
    )
}

/// Command lines for one action.
pub fn render_action(app_id: &str, action: &Action) -> Vec<String> {
    match action {
        Action::Deploy { service, node } => vec![constraint_add(app_id, service, node)],
        Action::Migrate { service, from, to } => {
            vec![constraint_rm(app_id, service, from), constraint_add(app_id, service, to)]
        }
        Action::Remove { service } => vec![format!("docker service rm {}", docker_service_name(app_id, service))],
        Action::RemoveApp => vec![format!("docker stack rm {app_id}")],
    }
}

/// Docker CLI lines equivalent to `plan`, in execution order.
pub fn render_commands(plan: &ActionPlan) -> Vec<String> {
    plan.actions()
        .iter()
        .flat_map(|a| render_action(&plan.app_id, a))
        .collect()
}
