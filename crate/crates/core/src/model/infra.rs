use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ids::{NodeId, NodePair};
use super::ModelError;

/// Monitored state of one node at an instant. Hardware is free RAM in MB.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: NodeId,
    pub free_hw: u64,
    #[serde(default)]
    pub software: BTreeSet<String>,
    #[serde(default)]
    pub iot: BTreeSet<String>,
    pub alive: bool,
}

impl NodeState {
    pub fn new(id: impl Into<NodeId>, free_hw: u64) -> Self {
        Self {
            id: id.into(),
            free_hw,
            software: BTreeSet::new(),
            iot: BTreeSet::new(),
            alive: true,
        }
    }

    pub fn with_software<I, S>(mut self, software: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.software = software.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_iot<I, S>(mut self, iot: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.iot = iot.into_iter().map(Into::into).collect();
        self
    }
}

/// Directed link QoS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub src: NodeId,
    pub dst: NodeId,
    pub latency_ms: f64,
    pub bandwidth_mbps: f64,
    pub alive: bool,
}

impl LinkState {
    pub fn new(src: impl Into<NodeId>, dst: impl Into<NodeId>, latency_ms: f64, bandwidth_mbps: f64) -> Self {
        Self {
            src: src.into(),
            dst: dst.into(),
            latency_ms,
            bandwidth_mbps,
            alive: true,
        }
    }
}

/// Read-only view of a link, including the implicit self-link of a node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkView {
    pub latency_ms: f64,
    pub bandwidth_mbps: f64,
    pub alive: bool,
}

/// Nodes and directed links at one report sequence number.
///
/// Construction normalizes liveness: a link touching a dead node is marked
/// dead. Snapshots are immutable once built.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InfrastructureSnapshot {
    timestamp: u64,
    nodes: BTreeMap<NodeId, NodeState>,
    links: BTreeMap<NodePair, LinkState>,
}

impl InfrastructureSnapshot {
    pub fn new(
        timestamp: u64,
        nodes: impl IntoIterator<Item = NodeState>,
        links: impl IntoIterator<Item = LinkState>,
    ) -> Result<Self, ModelError> {
        let mut node_map = BTreeMap::new();
        for node in nodes {
            let id = node.id.clone();
            if node_map.insert(id.clone(), node).is_some() {
                return Err(ModelError::DuplicateNode(id));
            }
        }
        let mut link_map = BTreeMap::new();
        for mut link in links {
            if link.src == link.dst {
                return Err(ModelError::SelfLink(link.src));
            }
            let (Some(src), Some(dst)) = (node_map.get(&link.src), node_map.get(&link.dst)) else {
                let missing = if node_map.contains_key(&link.src) { link.dst } else { link.src };
                return Err(ModelError::UnknownLinkEndpoint(missing));
            };
            if !(link.latency_ms >= 0.0) || !(link.bandwidth_mbps >= 0.0) {
                return Err(ModelError::NegativeLinkMetric(link.src, link.dst));
            }
            link.alive &= src.alive && dst.alive;
            let key = (link.src.clone(), link.dst.clone());
            if link_map.contains_key(&key) {
                return Err(ModelError::DuplicateLink(key.0, key.1));
            }
            link_map.insert(key, link);
        }
        Ok(Self {
            timestamp,
            nodes: node_map,
            links: link_map,
        })
    }

    pub fn timestamp(&self) -> u64 {
        self.timestamp
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, NodeState> {
        &self.nodes
    }

    pub fn links(&self) -> &BTreeMap<NodePair, LinkState> {
        &self.links
    }

    pub fn node(&self, id: &str) -> Option<&NodeState> {
        self.nodes.get(id)
    }

    /// Directed link lookup. `(n, n)` yields the implicit zero-latency,
    /// infinite-bandwidth self-link.
    pub fn link(&self, src: &NodeId, dst: &NodeId) -> Option<LinkView> {
        if src == dst {
            return self.nodes.get(src).map(|n| LinkView {
                latency_ms: 0.0,
                bandwidth_mbps: f64::INFINITY,
                alive: n.alive,
            });
        }
        self.links.get(&(src.clone(), dst.clone())).map(|l| LinkView {
            latency_ms: l.latency_ms,
            bandwidth_mbps: l.bandwidth_mbps,
            alive: l.alive,
        })
    }

    pub fn alive_nodes(&self) -> impl Iterator<Item = &NodeState> {
        self.nodes.values().filter(|n| n.alive)
    }

    /// Returns a copy carrying a different sequence number.
    pub fn with_timestamp(&self, timestamp: u64) -> Self {
        Self {
            timestamp,
            ..self.clone()
        }
    }

    pub fn into_parts(self) -> (u64, Vec<NodeState>, Vec<LinkState>) {
        (
            self.timestamp,
            self.nodes.into_values().collect(),
            self.links.into_values().collect(),
        )
    }
}
