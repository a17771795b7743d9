//! Simulated two-tier monitoring overlay.
//!
//! Followers measure links inside their group and towards their leader,
//! leaders measure links among themselves, and every other pair is
//! estimated by composing segments through the two leaders.

mod estimate;
mod kmedoids;
mod monitor;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{InfrastructureSnapshot, NodeId, NodePair};

pub use estimate::{estimate_qos, Measurement};
pub use kmedoids::{default_k, latency_distance, restructure, restructure_traced, RestructureTrace};
pub use monitor::{MetricSeries, OverlayMonitor, RELATIVE_EPSILON};

/// The monitored world. Only the dynamics engine mutates it; the overlay
/// samples it.
pub type GroundTruth = InfrastructureSnapshot;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OverlayError {
    #[error("node `{0}` is unknown")]
    NodeUnknown(NodeId),
    #[error("node `{0}` is down")]
    NodeDown(NodeId),
    #[error("restructuring into {k} groups needs at least {k} alive nodes, found {alive}")]
    TooFewNodes { k: usize, alive: usize },
    #[error("no measurement for segment {0}->{1}")]
    SegmentMissing(NodeId, NodeId),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayState {
    pub leaders: BTreeSet<NodeId>,
    pub follower_of: BTreeMap<NodeId, NodeId>,
    pub epoch: u64,
}

impl OverlayState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, node: &str) -> bool {
        self.leaders.contains(node) || self.follower_of.contains_key(node)
    }

    /// The leader of `node`'s group; a leader leads itself.
    pub fn leader_of<'a>(&'a self, node: &'a NodeId) -> Option<&'a NodeId> {
        if self.leaders.contains(node) {
            Some(node)
        } else {
            self.follower_of.get(node)
        }
    }

    pub fn members(&self) -> impl Iterator<Item = &NodeId> {
        let mut all: Vec<&NodeId> = self.leaders.iter().chain(self.follower_of.keys()).collect();
        all.sort();
        all.into_iter()
    }

    /// Group membership keyed by leader, leader included.
    pub fn groups(&self) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
        let mut groups: BTreeMap<NodeId, BTreeSet<NodeId>> =
            self.leaders.iter().map(|l| (l.clone(), BTreeSet::from([l.clone()]))).collect();
        for (f, l) in &self.follower_of {
            groups.entry(l.clone()).or_default().insert(f.clone());
        }
        groups
    }

    /// Directed pairs measured directly: within a group (which includes
    /// each follower and its leader) and between leaders.
    pub fn measured_pairs(&self) -> BTreeSet<NodePair> {
        let mut out = BTreeSet::new();
        for members in self.groups().values() {
            for a in members {
                for b in members {
                    if a != b {
                        out.insert((a.clone(), b.clone()));
                    }
                }
            }
        }
        for a in &self.leaders {
            for b in &self.leaders {
                if a != b {
                    out.insert((a.clone(), b.clone()));
                }
            }
        }
        out
    }

    pub fn is_measured(&self, a: &NodeId, b: &NodeId) -> bool {
        match (self.leader_of(a), self.leader_of(b)) {
            (Some(la), Some(lb)) => la == lb || (la == a && lb == b),
            _ => false,
        }
    }
}

fn ground_latency(gt: &GroundTruth, a: &NodeId, b: &NodeId) -> Option<f64> {
    gt.link(a, b).filter(|l| l.alive).map(|l| l.latency_ms)
}

/// Adds (or re-seats) `node` as a follower of the reachable leader with the
/// minimum latency from it, ties to the smaller id. An empty overlay, or one
/// with no reachable leader, makes the node a leader.
pub fn join(node: &NodeId, overlay: &OverlayState, gt: &GroundTruth) -> Result<OverlayState, OverlayError> {
    let state = gt.node(node.as_str()).ok_or_else(|| OverlayError::NodeUnknown(node.clone()))?;
    if !state.alive {
        return Err(OverlayError::NodeDown(node.clone()));
    }
    let mut next = overlay.clone();
    if next.leaders.contains(node) {
        return Ok(next);
    }
    next.follower_of.remove(node);
    let best = next
        .leaders
        .iter()
        .filter_map(|l| ground_latency(gt, node, l).map(|lat| (lat, l)))
        .min_by(|(la, a), (lb, b)| la.total_cmp(lb).then_with(|| a.cmp(b)))
        .map(|(_, l)| l.clone());
    match best {
        Some(leader) => {
            next.follower_of.insert(node.clone(), leader);
        }
        None => {
            next.leaders.insert(node.clone());
        }
    }
    Ok(next)
}

/// Drops dead leaders and re-joins their alive followers; followers of a
/// dead leader that are dead themselves leave the overlay.
pub fn repair(overlay: &OverlayState, gt: &GroundTruth) -> OverlayState {
    let dead: BTreeSet<NodeId> = overlay
        .leaders
        .iter()
        .filter(|l| !gt.node(l.as_str()).is_some_and(|n| n.alive))
        .cloned()
        .collect();
    if dead.is_empty() {
        return overlay.clone();
    }
    let mut next = overlay.clone();
    next.leaders.retain(|l| !dead.contains(l));
    let orphans: Vec<NodeId> = next
        .follower_of
        .iter()
        .filter(|(_, l)| dead.contains(*l))
        .map(|(f, _)| f.clone())
        .collect();
    for f in &orphans {
        next.follower_of.remove(f);
    }
    for f in orphans {
        if let Ok(joined) = join(&f, &next, gt) {
            next = joined;
        }
    }
    next
}
