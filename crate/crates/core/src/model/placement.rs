use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::app::ApplicationSpec;
use super::ids::{NodeId, NodePair, ServiceId};

/// Map from an application's services to the nodes hosting them.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub app_id: String,
    pub assignment: BTreeMap<ServiceId, NodeId>,
}

impl Placement {
    pub fn new(app_id: impl Into<String>) -> Self {
        Self {
            app_id: app_id.into(),
            assignment: BTreeMap::new(),
        }
    }

    pub fn with(mut self, service: impl Into<ServiceId>, node: impl Into<NodeId>) -> Self {
        self.assignment.insert(service.into(), node.into());
        self
    }

    pub fn node_of(&self, service: &str) -> Option<&NodeId> {
        self.assignment.get(service)
    }

    pub fn is_total_for(&self, spec: &ApplicationSpec) -> bool {
        spec.services.keys().all(|s| self.assignment.contains_key(s))
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }
}

/// Hardware consumed per node and bandwidth consumed per directed link.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AllocationLedger {
    pub hw_used: BTreeMap<NodeId, u64>,
    #[serde(with = "pair_map")]
    pub bw_used: BTreeMap<NodePair, f64>,
}

impl AllocationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ledger of exactly one placement. Services missing from the spec, or
    /// unassigned, contribute nothing; colocated pairs consume no bandwidth.
    pub fn of_placement(spec: &ApplicationSpec, placement: &Placement) -> Self {
        let mut ledger = Self::new();
        ledger.charge(spec, placement);
        ledger
    }

    pub fn hw(&self, node: &str) -> u64 {
        self.hw_used.get(node).copied().unwrap_or(0)
    }

    pub fn bw(&self, src: &NodeId, dst: &NodeId) -> f64 {
        self.bw_used
            .get(&(src.clone(), dst.clone()))
            .copied()
            .unwrap_or(0.0)
    }

    /// Zero demands leave no entry.
    pub fn charge(&mut self, spec: &ApplicationSpec, placement: &Placement) {
        for (sid, node) in &placement.assignment {
            if let Some(req) = spec.services.get(sid).filter(|r| r.hardware > 0) {
                *self.hw_used.entry(node.clone()).or_insert(0) += req.hardware;
            }
        }
        for (from, to, link) in spec.link_requirements() {
            let (Some(a), Some(b)) = (placement.node_of(from.as_str()), placement.node_of(to.as_str())) else {
                continue;
            };
            if a != b && link.min_bandwidth_mbps > 0.0 {
                *self.bw_used.entry((a.clone(), b.clone())).or_insert(0.0) += link.min_bandwidth_mbps;
            }
        }
    }

    /// Inverse of [`charge`](Self::charge). Entries dropping to zero are removed.
    pub fn release(&mut self, spec: &ApplicationSpec, placement: &Placement) {
        for (sid, node) in &placement.assignment {
            if let Some(req) = spec.services.get(sid) {
                if let Some(used) = self.hw_used.get_mut(node) {
                    *used = used.saturating_sub(req.hardware);
                    if *used == 0 {
                        self.hw_used.remove(node);
                    }
                }
            }
        }
        for (from, to, link) in spec.link_requirements() {
            let (Some(a), Some(b)) = (placement.node_of(from.as_str()), placement.node_of(to.as_str())) else {
                continue;
            };
            if a == b {
                continue;
            }
            let key = (a.clone(), b.clone());
            if let Some(used) = self.bw_used.get_mut(&key) {
                *used -= link.min_bandwidth_mbps;
                if *used <= 1e-9 {
                    self.bw_used.remove(&key);
                }
            }
        }
    }

    pub fn merge(&mut self, other: &AllocationLedger) {
        for (n, hw) in &other.hw_used {
            *self.hw_used.entry(n.clone()).or_insert(0) += hw;
        }
        for (l, bw) in &other.bw_used {
            *self.bw_used.entry(l.clone()).or_insert(0.0) += bw;
        }
    }

    /// Equality with a bandwidth tolerance; hardware must match exactly.
    pub fn approx_eq(&self, other: &AllocationLedger, bw_tol: f64) -> bool {
        if self.hw_used != other.hw_used {
            return false;
        }
        let keys: std::collections::BTreeSet<_> = self.bw_used.keys().chain(other.bw_used.keys()).collect();
        keys.into_iter().all(|k| {
            let a = self.bw_used.get(k).copied().unwrap_or(0.0);
            let b = other.bw_used.get(k).copied().unwrap_or(0.0);
            (a - b).abs() <= bw_tol
        })
    }
}

mod pair_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::model::NodePair;

    #[derive(Serialize, Deserialize)]
    struct Entry {
        src: String,
        dst: String,
        mbps: f64,
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<NodePair, f64>, s: S) -> Result<S::Ok, S::Error> {
        map.iter()
            .map(|((a, b), v)| Entry {
                src: a.to_string(),
                dst: b.to_string(),
                mbps: *v,
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<NodePair, f64>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        Ok(entries
            .into_iter()
            .map(|e| ((e.src.into(), e.dst.into()), e.mbps))
            .collect())
    }
}
