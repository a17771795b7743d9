//! Exhaustive backtracking placement search.

use std::collections::BTreeSet;

use crate::model::{AllocationLedger, ApplicationSpec, InfrastructureSnapshot, NodeId, Placement, ServiceId};

use super::validate::validate;

/// Result of one search, successful or not.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub placement: Option<Placement>,
    /// Candidate `(service, node)` assignments tried.
    pub explored: u64,
}

struct Constraint {
    other: usize,
    /// true: this service -> other; false: other -> this service.
    outgoing: bool,
    max_latency: f64,
    bandwidth: f64,
}

struct LinkCell {
    latency: f64,
    capacity: f64,
}

struct Search<'a> {
    spec: &'a ApplicationSpec,
    snapshot: &'a InfrastructureSnapshot,
    external: &'a AllocationLedger,
    app_id: String,
    service_ids: Vec<ServiceId>,
    node_ids: Vec<NodeId>,
    candidates: Vec<usize>,
    hardware: Vec<u64>,
    /// `unary[s][n]`: software, IoT and liveness are satisfied.
    unary: Vec<Vec<bool>>,
    constraints: Vec<Vec<Constraint>>,
    links: Vec<Option<LinkCell>>,
    bw_used: Vec<f64>,
    hw_left: Vec<i64>,
    assigned: Vec<Option<usize>>,
    order: Vec<usize>,
    explored: u64,
}

impl<'a> Search<'a> {
    fn placement(&self) -> Placement {
        let mut p = Placement::new(self.app_id.clone());
        for (s, n) in self.assigned.iter().enumerate() {
            if let Some(n) = n {
                p.assignment.insert(self.service_ids[s].clone(), self.node_ids[*n].clone());
            }
        }
        p
    }

    fn dfs(&mut self, depth: usize) -> bool {
        if depth == self.order.len() {
            // Floating-point sums may be ordered differently from validate's;
            // the final validation is authoritative.
            let p = self.placement();
            return validate(self.spec, &p, self.snapshot, self.external).is_empty();
        }
        let s = self.order[depth];
        let nn = self.node_ids.len();
        let mut undo: Vec<(usize, f64)> = Vec::new();
        for ci in 0..self.candidates.len() {
            let n = self.candidates[ci];
            self.explored += 1;
            if !self.unary[s][n] || self.hw_left[n] < self.hardware[s] as i64 {
                continue;
            }
            undo.clear();
            let mut ok = true;
            for c in &self.constraints[s] {
                let Some(m) = self.assigned[c.other] else { continue };
                let (a, b) = if c.outgoing { (n, m) } else { (m, n) };
                if a == b {
                    continue;
                }
                let idx = a * nn + b;
                let Some(cell) = self.links[idx].as_ref() else {
                    ok = false;
                    break;
                };
                if cell.latency > c.max_latency || self.bw_used[idx] + c.bandwidth > cell.capacity {
                    ok = false;
                    break;
                }
                undo.push((idx, self.bw_used[idx]));
                self.bw_used[idx] += c.bandwidth;
            }
            if ok {
                self.assigned[s] = Some(n);
                self.hw_left[n] -= self.hardware[s] as i64;
                let saved = std::mem::take(&mut undo);
                if self.dfs(depth + 1) {
                    return true;
                }
                undo = saved;
                self.hw_left[n] += self.hardware[s] as i64;
                self.assigned[s] = None;
            }
            for &(idx, old) in undo.iter().rev() {
                self.bw_used[idx] = old;
            }
        }
        false
    }
}

/// Extends `fixed` to a total valid placement, if one exists.
///
/// Services in `to_place`, plus any spec service `fixed` does not cover, are
/// searched; the rest keep their `fixed` node. Variables are ordered by
/// descending hardware (ties by ascending id), values by ascending node id,
/// and a candidate is pruned as soon as a node or link constraint against
/// already-assigned services fails.
pub fn search(
    spec: &ApplicationSpec,
    snapshot: &InfrastructureSnapshot,
    fixed: &Placement,
    to_place: &BTreeSet<ServiceId>,
    external: &AllocationLedger,
) -> SearchOutcome {
    let fail = |explored| SearchOutcome {
        placement: None,
        explored,
    };

    let service_ids: Vec<ServiceId> = spec.services.keys().cloned().collect();
    let node_ids: Vec<NodeId> = snapshot.nodes().keys().cloned().collect();
    let nn = node_ids.len();
    let service_index = |id: &ServiceId| service_ids.binary_search(id).ok();
    let node_index = |id: &NodeId| node_ids.binary_search(id).ok();

    let searched: BTreeSet<usize> = service_ids
        .iter()
        .enumerate()
        .filter(|(_, id)| to_place.contains(*id) || !fixed.assignment.contains_key(*id))
        .map(|(i, _)| i)
        .collect();

    // The kept part must be valid on its own.
    let kept_ids: BTreeSet<ServiceId> = service_ids
        .iter()
        .enumerate()
        .filter(|(i, _)| !searched.contains(i))
        .map(|(_, id)| id.clone())
        .collect();
    let mut kept = Placement::new(spec.app_id.clone());
    for id in &kept_ids {
        kept.assignment.insert(id.clone(), fixed.assignment[id].clone());
    }
    if !validate(&spec.restricted_to(&kept_ids), &kept, snapshot, external).is_empty() {
        return fail(0);
    }

    let hardware: Vec<u64> = service_ids.iter().map(|id| spec.services[id].hardware).collect();
    let nodes: Vec<_> = snapshot.nodes().values().collect();
    let unary: Vec<Vec<bool>> = service_ids
        .iter()
        .map(|id| {
            let req = &spec.services[id];
            nodes
                .iter()
                .map(|n| n.alive && req.software.is_subset(&n.software) && req.iot.is_subset(&n.iot))
                .collect()
        })
        .collect();

    let mut links: Vec<Option<LinkCell>> = (0..nn * nn).map(|_| None).collect();
    for ((a, b), l) in snapshot.links() {
        if l.alive {
            let (Some(i), Some(j)) = (node_index(a), node_index(b)) else { continue };
            links[i * nn + j] = Some(LinkCell {
                latency: l.latency_ms,
                capacity: l.bandwidth_mbps,
            });
        }
    }
    let mut bw_used = vec![0.0; nn * nn];
    for ((a, b), used) in &external.bw_used {
        if let (Some(i), Some(j)) = (node_index(a), node_index(b)) {
            bw_used[i * nn + j] = *used;
        }
    }
    let mut hw_left: Vec<i64> = nodes
        .iter()
        .map(|n| n.free_hw as i64 - external.hw(n.id.as_str()) as i64)
        .collect();

    let mut assigned = vec![None; service_ids.len()];
    for (id, node) in &kept.assignment {
        let (Some(s), Some(n)) = (service_index(id), node_index(node)) else {
            return fail(0);
        };
        assigned[s] = Some(n);
        hw_left[n] -= hardware[s] as i64;
    }

    let mut constraints: Vec<Vec<Constraint>> = (0..service_ids.len()).map(|_| Vec::new()).collect();
    for (from, to, req) in spec.link_requirements() {
        let (Some(f), Some(t)) = (service_index(from), service_index(to)) else { continue };
        constraints[f].push(Constraint {
            other: t,
            outgoing: true,
            max_latency: req.max_latency_ms,
            bandwidth: req.min_bandwidth_mbps,
        });
        constraints[t].push(Constraint {
            other: f,
            outgoing: false,
            max_latency: req.max_latency_ms,
            bandwidth: req.min_bandwidth_mbps,
        });
        // Kept pairs already consume bandwidth.
        if let (Some(a), Some(b)) = (assigned[f], assigned[t]) {
            if a != b {
                bw_used[a * nn + b] += req.min_bandwidth_mbps;
            }
        }
    }

    let candidates: Vec<usize> = (0..nn).filter(|&n| nodes[n].alive).collect();

    let mut order: Vec<usize> = searched.into_iter().collect();
    order.sort_by(|&a, &b| hardware[b].cmp(&hardware[a]).then_with(|| service_ids[a].cmp(&service_ids[b])));

    // Cheap necessary conditions; they never reject a feasible instance.
    for &s in &order {
        if !candidates
            .iter()
            .any(|&n| unary[s][n] && hw_left[n] >= hardware[s] as i64)
        {
            return fail(0);
        }
    }
    let demand: u64 = order.iter().map(|&s| hardware[s]).sum();
    let room: i64 = candidates.iter().map(|&n| hw_left[n].max(0)).sum();
    if demand as i64 > room {
        return fail(0);
    }

    let mut state = Search {
        spec,
        snapshot,
        external,
        app_id: spec.app_id.clone(),
        service_ids,
        node_ids,
        candidates,
        hardware,
        unary,
        constraints,
        links,
        bw_used,
        hw_left,
        assigned,
        order,
        explored: 0,
    };
    let found = state.dfs(0);
    SearchOutcome {
        placement: found.then(|| state.placement()),
        explored: state.explored,
    }
}
