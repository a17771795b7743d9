use chrono::{DateTime, Utc};
use edgearm::model::{NodeId, Placement, ServiceId};
use edgearm::watcher::{AppIssue, Watcher};
use serde::{Deserialize, Serialize};

use crate::state::{AppMeta, Stamp};

/// Desired against actual placement of one application.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppStatus {
    pub app_id: String,
    pub desired: Placement,
    pub current: Placement,
    /// Desired and current assignments are equal service by service.
    #[serde(rename = "match")]
    pub matches: bool,
    pub last_update: Option<Stamp>,
    pub uptime_secs: f64,
    pub degraded: bool,
    pub steps: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub issue: Option<AppIssue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceRow {
    pub service: ServiceId,
    pub desired: Option<NodeId>,
    pub current: Option<NodeId>,
}

impl AppStatus {
    pub fn build(app_id: &str, watcher: &Watcher, meta: Option<&AppMeta>, now: DateTime<Utc>) -> Self {
        let rec = watcher.reconciler();
        let desired = rec
            .placement(app_id)
            .cloned()
            .unwrap_or_else(|| Placement::new(app_id));
        let current = rec
            .backend()
            .current_placement(app_id)
            .unwrap_or_else(|| Placement::new(app_id));
        let uptime_secs = meta.map_or(0.0, |m| {
            (now - m.added_at).num_milliseconds().max(0) as f64 / 1000.0
        });
        Self {
            app_id: app_id.to_owned(),
            matches: desired.assignment == current.assignment,
            desired,
            current,
            last_update: meta.and_then(|m| m.last_update.clone()),
            uptime_secs,
            degraded: rec.is_degraded(app_id),
            steps: meta.map_or(0, |m| m.steps),
            issue: watcher.issues().get(app_id).cloned(),
        }
    }

    /// One row per service named by either placement.
    pub fn rows(&self) -> Vec<ServiceRow> {
        let mut services: Vec<&ServiceId> = self
            .desired
            .assignment
            .keys()
            .chain(self.current.assignment.keys())
            .collect();
        services.sort();
        services.dedup();
        services
            .into_iter()
            .map(|s| ServiceRow {
                service: s.clone(),
                desired: self.desired.assignment.get(s).cloned(),
                current: self.current.assignment.get(s).cloned(),
            })
            .collect()
    }
}
