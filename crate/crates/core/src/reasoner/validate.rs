use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{AllocationLedger, ApplicationSpec, InfrastructureSnapshot, NodeId, NodePair, Placement, ServiceId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NodeDown,
    HwInsufficient,
    SoftwareMissing,
    IotMissing,
    LinkDown,
    LatencyExceeded,
    BandwidthInsufficient,
    Unassigned,
}

impl ViolationKind {
    pub fn is_pairwise(self) -> bool {
        matches!(
            self,
            ViolationKind::LinkDown | ViolationKind::LatencyExceeded | ViolationKind::BandwidthInsufficient
        )
    }
}

/// One unmet requirement. `partner` is set exactly for pairwise (link) kinds.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub service: ServiceId,
    pub partner: Option<ServiceId>,
    pub node: Option<NodeId>,
    pub link: Option<NodePair>,
}

impl Violation {
    fn on_node(kind: ViolationKind, service: &ServiceId, node: &NodeId) -> Self {
        Self {
            kind,
            service: service.clone(),
            partner: None,
            node: Some(node.clone()),
            link: None,
        }
    }

    fn on_link(kind: ViolationKind, service: &ServiceId, partner: &ServiceId, link: &NodePair) -> Self {
        Self {
            kind,
            service: service.clone(),
            partner: Some(partner.clone()),
            node: None,
            link: Some(link.clone()),
        }
    }
}

/// Checks `placement` against `snapshot`, charging it on top of `external`
/// (the allocations of every other committed application).
///
/// Returns every violated constraint; an empty list means the placement is
/// valid. Placement entries for services the spec does not declare are
/// ignored.
pub fn validate(
    spec: &ApplicationSpec,
    placement: &Placement,
    snapshot: &InfrastructureSnapshot,
    external: &AllocationLedger,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut per_node: BTreeMap<&NodeId, (u64, Vec<&ServiceId>)> = BTreeMap::new();

    for (sid, req) in &spec.services {
        let Some(node_id) = placement.assignment.get(sid) else {
            out.push(Violation {
                kind: ViolationKind::Unassigned,
                service: sid.clone(),
                partner: None,
                node: None,
                link: None,
            });
            continue;
        };
        let node = match snapshot.node(node_id.as_str()) {
            Some(n) if n.alive => n,
            _ => {
                out.push(Violation::on_node(ViolationKind::NodeDown, sid, node_id));
                continue;
            }
        };
        if !req.software.is_subset(&node.software) {
            out.push(Violation::on_node(ViolationKind::SoftwareMissing, sid, node_id));
        }
        if !req.iot.is_subset(&node.iot) {
            out.push(Violation::on_node(ViolationKind::IotMissing, sid, node_id));
        }
        let entry = per_node.entry(node_id).or_default();
        entry.0 += req.hardware;
        entry.1.push(sid);
    }

    for (node_id, (demand, services)) in per_node {
        let free = snapshot.node(node_id.as_str()).map_or(0, |n| n.free_hw);
        if external.hw(node_id.as_str()).saturating_add(demand) > free {
            for sid in services {
                out.push(Violation::on_node(ViolationKind::HwInsufficient, sid, node_id));
            }
        }
    }

    let mut per_link: BTreeMap<NodePair, (f64, Vec<(&ServiceId, &ServiceId)>)> = BTreeMap::new();
    for (from, to, req) in spec.link_requirements() {
        let (Some(a), Some(b)) = (placement.assignment.get(from), placement.assignment.get(to)) else {
            continue;
        };
        if a == b {
            continue;
        }
        let key = (a.clone(), b.clone());
        match snapshot.link(a, b) {
            Some(view) if view.alive => {
                if view.latency_ms > req.max_latency_ms {
                    out.push(Violation::on_link(ViolationKind::LatencyExceeded, from, to, &key));
                }
                let entry = per_link.entry(key).or_insert((0.0, Vec::new()));
                entry.0 += req.min_bandwidth_mbps;
                entry.1.push((from, to));
            }
            _ => out.push(Violation::on_link(ViolationKind::LinkDown, from, to, &key)),
        }
    }
    for (key, (demand, pairs)) in per_link {
        let capacity = snapshot.link(&key.0, &key.1).map_or(0.0, |v| v.bandwidth_mbps);
        if external.bw(&key.0, &key.1) + demand > capacity {
            for (from, to) in pairs {
                out.push(Violation::on_link(ViolationKind::BandwidthInsufficient, from, to, &key));
            }
        }
    }
    out
}
