use serde::{Deserialize, Serialize};

use crate::model::{LinkState, NodeId, NodeState};
use crate::overlay::GroundTruth;

use super::DynamicsError;

/// Baseline values of a generated testbed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestbedParams {
    pub intra_latency_ms: f64,
    pub inter_latency_ms: f64,
    pub bandwidth_mbps: f64,
    pub free_hw: u64,
}

impl Default for TestbedParams {
    fn default() -> Self {
        Self {
            intra_latency_ms: 5.0,
            inter_latency_ms: 40.0,
            bandwidth_mbps: 100.0,
            free_hw: 6144,
        }
    }
}

/// Nodes per region; the remainder goes to the lowest-index regions.
pub fn region_sizes(n_nodes: usize, n_regions: usize) -> Result<Vec<usize>, DynamicsError> {
    if n_regions == 0 || n_nodes < n_regions {
        return Err(DynamicsError::InvalidShape { n_nodes, n_regions });
    }
    let (base, extra) = (n_nodes / n_regions, n_nodes % n_regions);
    Ok((0..n_regions).map(|r| base + usize::from(r < extra)).collect())
}

/// Node ids are `n` plus a zero-padded index, so they sort numerically.
pub fn node_ids(n_nodes: usize) -> Vec<NodeId> {
    let width = n_nodes.saturating_sub(1).to_string().len().max(2);
    (0..n_nodes).map(|i| NodeId::new(format!("n{i:0width$}"))).collect()
}

pub fn build_testbed(n_nodes: usize, n_regions: usize) -> Result<GroundTruth, DynamicsError> {
    build_testbed_with(n_nodes, n_regions, &TestbedParams::default())
}

/// Full mesh of directed links; regions are contiguous id ranges.
pub fn build_testbed_with(n_nodes: usize, n_regions: usize, params: &TestbedParams) -> Result<GroundTruth, DynamicsError> {
    let sizes = region_sizes(n_nodes, n_regions)?;
    let region: Vec<usize> = sizes.iter().enumerate().flat_map(|(r, &k)| std::iter::repeat_n(r, k)).collect();
    let ids = node_ids(n_nodes);
    let nodes = ids.iter().map(|id| NodeState::new(id.clone(), params.free_hw));
    let mut links = Vec::with_capacity(n_nodes * n_nodes.saturating_sub(1));
    for (i, a) in ids.iter().enumerate() {
        for (j, b) in ids.iter().enumerate() {
            if i != j {
                let latency = if region[i] == region[j] {
                    params.intra_latency_ms
                } else {
                    params.inter_latency_ms
                };
                links.push(LinkState::new(a.clone(), b.clone(), latency, params.bandwidth_mbps));
            }
        }
    }
    Ok(GroundTruth::new(0, nodes, links).expect("generated testbed is well formed"))
}
