//! Normalized infrastructure report: the JSON document the monitor publishes
//! and the watcher consumes.

use serde::{Deserialize, Serialize};

use super::infra::{InfrastructureSnapshot, LinkState, NodeState};
use super::ModelError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfrastructureReport {
    pub timestamp: u64,
    pub nodes: Vec<NodeState>,
    pub links: Vec<LinkState>,
}

impl InfrastructureReport {
    pub fn from_snapshot(snapshot: &InfrastructureSnapshot) -> Self {
        Self {
            timestamp: snapshot.timestamp(),
            nodes: snapshot.nodes().values().cloned().collect(),
            links: snapshot.links().values().cloned().collect(),
        }
    }

    pub fn to_snapshot(&self) -> Result<InfrastructureSnapshot, ModelError> {
        InfrastructureSnapshot::new(self.timestamp, self.nodes.iter().cloned(), self.links.iter().cloned())
    }

    /// Canonical bytes: nodes sorted by id, links by `(src, dst)`, compact JSON.
    pub fn to_json(&self) -> String {
        let mut sorted = self.clone();
        sorted.nodes.sort_by(|a, b| a.id.cmp(&b.id));
        sorted.links.sort_by(|a, b| (&a.src, &a.dst).cmp(&(&b.src, &b.dst)));
        serde_json::to_string(&sorted).expect("report serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ModelError> {
        serde_json::from_slice(bytes).map_err(|e| ModelError::MalformedReport(e.to_string()))
    }
}

/// Parses report bytes straight into a snapshot.
pub fn parse_report(bytes: &[u8]) -> Result<InfrastructureSnapshot, ModelError> {
    InfrastructureReport::from_json(bytes)?.to_snapshot()
}

pub fn render_report(snapshot: &InfrastructureSnapshot) -> String {
    InfrastructureReport::from_snapshot(snapshot).to_json()
}
