//! PAM-style k-medoids regrouping of the overlay on latency distances.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::NodeId;

use super::{GroundTruth, OverlayError, OverlayState};

/// Distance used for pairs with no latency information in either direction.
const UNREACHABLE: f64 = 1.0e6;

/// Per-iteration record of a restructure.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RestructureTrace {
    pub iterations: usize,
    /// Total node-to-medoid distance after each assignment step.
    pub costs: Vec<f64>,
}

/// Number of groups for `alive` nodes: ⌈√alive⌉.
pub fn default_k(alive: usize) -> usize {
    let mut k = 0usize;
    while k * k < alive {
        k += 1;
    }
    k
}

/// Symmetric distance matrix over `nodes`: the mean of the two directed
/// latencies, or the one available direction.
pub fn latency_distance(nodes: &[NodeId], gt: &GroundTruth) -> Vec<Vec<f64>> {
    nodes
        .iter()
        .map(|a| {
            nodes
                .iter()
                .map(|b| {
                    if a == b {
                        return 0.0;
                    }
                    let ab = gt.link(a, b).map(|l| l.latency_ms);
                    let ba = gt.link(b, a).map(|l| l.latency_ms);
                    match (ab, ba) {
                        (Some(x), Some(y)) => (x + y) / 2.0,
                        (Some(x), None) | (None, Some(x)) => x,
                        (None, None) => UNREACHABLE,
                    }
                })
                .collect()
        })
        .collect()
}

/// Assigns every index to its nearest medoid (ties to the earlier medoid in
/// `medoids`, which is kept sorted). Returns the assignment and its cost.
fn assign(dist: &[Vec<f64>], medoids: &[usize]) -> (Vec<usize>, f64) {
    let mut cost = 0.0;
    let owner = (0..dist.len())
        .map(|i| {
            let mut best = 0;
            for (m_pos, &m) in medoids.iter().enumerate() {
                if dist[i][m] < dist[i][medoids[best]] {
                    best = m_pos;
                }
            }
            cost += dist[i][medoids[best]];
            best
        })
        .collect();
    (owner, cost)
}

fn update(dist: &[Vec<f64>], medoids: &[usize], owner: &[usize]) -> Vec<usize> {
    let mut next: Vec<usize> = (0..medoids.len())
        .map(|g| {
            let members: Vec<usize> = (0..dist.len()).filter(|&i| owner[i] == g).collect();
            if members.is_empty() {
                // Only possible when two medoids sit at distance zero.
                return medoids[g];
            }
            // Members are in ascending index order, so the first minimum is
            // the smallest node id.
            let mut best = members[0];
            let mut best_sum = f64::INFINITY;
            for &c in &members {
                let sum: f64 = members.iter().map(|&m| dist[c][m]).sum();
                if sum < best_sum {
                    best = c;
                    best_sum = sum;
                }
            }
            best
        })
        .collect();
    next.sort_unstable();
    next
}

/// Core loop over index space; `initial` must be sorted and distinct.
pub(crate) fn kmedoids(dist: &[Vec<f64>], initial: Vec<usize>) -> (Vec<usize>, Vec<usize>, RestructureTrace) {
    let n = dist.len();
    let cap = (n * n).max(1);
    let mut medoids = initial;
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut trace = RestructureTrace::default();
    loop {
        trace.iterations += 1;
        let (owner, cost) = assign(dist, &medoids);
        trace.costs.push(cost);
        let next = update(dist, &medoids, &owner);
        seen.insert(medoids.clone());
        if next == medoids || seen.contains(&next) || trace.iterations >= cap {
            return (medoids, owner, trace);
        }
        medoids = next;
    }
}

/// Regroups the alive nodes into `k` groups; medoids become leaders.
pub fn restructure(overlay: &OverlayState, gt: &GroundTruth, k: usize) -> Result<OverlayState, OverlayError> {
    restructure_traced(overlay, gt, k).map(|(o, _)| o)
}

pub fn restructure_traced(
    overlay: &OverlayState,
    gt: &GroundTruth,
    k: usize,
) -> Result<(OverlayState, RestructureTrace), OverlayError> {
    let nodes: Vec<NodeId> = gt.alive_nodes().map(|n| n.id.clone()).collect();
    if k == 0 || nodes.len() < k {
        return Err(OverlayError::TooFewNodes { k, alive: nodes.len() });
    }
    let dist = latency_distance(&nodes, gt);
    let index: BTreeMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let current: Vec<usize> = overlay.leaders.iter().filter_map(|l| index.get(l).copied()).collect();
    let initial = if current.len() == k { current } else { (0..k).collect() };

    let (medoids, owner, trace) = kmedoids(&dist, initial);
    let mut next = OverlayState {
        leaders: medoids.iter().map(|&m| nodes[m].clone()).collect(),
        follower_of: BTreeMap::new(),
        epoch: overlay.epoch + 1,
    };
    for (i, node) in nodes.iter().enumerate() {
        let leader = medoids[owner[i]];
        if leader != i {
            next.follower_of.insert(node.clone(), nodes[leader].clone());
        }
    }
    Ok((next, trace))
}
