//! Sampling, statistical aggregation and sensitivity-gated publication.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{InfrastructureReport, LinkState, NodeId, NodePair, NodeState};

use super::estimate::{estimate_qos, Measurement};
use super::kmedoids::{default_k, restructure};
use super::{join, repair, GroundTruth, OverlayState};

/// Guards the relative-difference test against zero denominators.
pub const RELATIVE_EPSILON: f64 = 1e-9;

fn relative_change(current: f64, last: f64) -> f64 {
    (current - last).abs() / last.abs().max(RELATIVE_EPSILON)
}

/// Running mean/variance of one metric since its last publication.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub last_published_mean: Option<f64>,
    pub last_published_variance: f64,
    count: u64,
    mean: f64,
    m2: f64,
}

impl MetricSeries {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn samples(&self) -> u64 {
        self.count
    }

    pub fn current_mean(&self) -> f64 {
        self.mean
    }

    /// Population variance of the current window.
    pub fn current_variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    /// Whether the current window differs enough from the published values.
    pub fn crosses(&self, sensitivity: f64) -> bool {
        if self.count == 0 {
            return false;
        }
        match self.last_published_mean {
            None => true,
            Some(last) => {
                relative_change(self.current_mean(), last) > sensitivity
                    || relative_change(self.current_variance(), self.last_published_variance) > sensitivity
            }
        }
    }

    /// Makes the current window the published value and starts a new window.
    pub fn publish(&mut self) {
        self.last_published_mean = Some(self.current_mean());
        self.last_published_variance = self.current_variance();
        self.count = 0;
        self.mean = 0.0;
        self.m2 = 0.0;
    }

    pub fn published(&self) -> Option<f64> {
        self.last_published_mean
    }
}

/// A simulated monitoring overlay bound to one ground-truth world.
#[derive(Clone, Debug)]
pub struct OverlayMonitor {
    overlay: OverlayState,
    sensitivity: f64,
    restructure_every: u64,
    ticks: u64,
    free_hw: BTreeMap<NodeId, MetricSeries>,
    latency: BTreeMap<NodePair, MetricSeries>,
    bandwidth: BTreeMap<NodePair, MetricSeries>,
    last: Option<InfrastructureReport>,
    last_json: Option<String>,
}

impl OverlayMonitor {
    pub fn new(sensitivity: f64, restructure_every: u64) -> Self {
        Self {
            overlay: OverlayState::new(),
            sensitivity,
            restructure_every: restructure_every.max(1),
            ticks: 0,
            free_hw: BTreeMap::new(),
            latency: BTreeMap::new(),
            bandwidth: BTreeMap::new(),
            last: None,
            last_json: None,
        }
    }

    pub fn overlay(&self) -> &OverlayState {
        &self.overlay
    }

    pub fn set_overlay(&mut self, overlay: OverlayState) {
        self.overlay = overlay;
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn set_sensitivity(&mut self, sensitivity: f64) {
        self.sensitivity = sensitivity;
    }

    pub fn node_series(&self, node: &str) -> Option<&MetricSeries> {
        self.free_hw.get(node)
    }

    pub fn latest_report(&self) -> Option<&str> {
        self.last_json.as_deref()
    }

    /// Replaces dead leaders and lets newly alive nodes join.
    pub fn sync_membership(&mut self, gt: &GroundTruth) {
        let mut overlay = repair(&self.overlay, gt);
        for node in gt.alive_nodes() {
            if !overlay.contains(node.id.as_str()) {
                if let Ok(next) = join(&node.id, &overlay, gt) {
                    overlay = next;
                }
            }
        }
        self.overlay = overlay;
    }

    /// One monitoring period: membership upkeep, periodic restructure, then
    /// [`sample_and_publish`](Self::sample_and_publish).
    pub fn tick(&mut self, gt: &GroundTruth) -> Option<String> {
        self.sync_membership(gt);
        if self.ticks % self.restructure_every == 0 {
            let alive = gt.alive_nodes().count();
            if alive > 0 {
                if let Ok(next) = restructure(&self.overlay, gt, default_k(alive)) {
                    self.overlay = next;
                }
            }
        }
        self.ticks += 1;
        self.sample_and_publish(gt)
    }

    fn segments(&self, a: &NodeId, b: &NodeId) -> Vec<NodePair> {
        let (Some(la), Some(lb)) = (self.overlay.leader_of(a), self.overlay.leader_of(b)) else {
            return Vec::new();
        };
        let mut path = Vec::new();
        if a != la {
            path.push((a.clone(), la.clone()));
        }
        path.push((la.clone(), lb.clone()));
        if b != lb {
            path.push((lb.clone(), b.clone()));
        }
        path
    }

    /// Samples every measured pair and node, republishes the metrics whose
    /// mean or variance moved by more than the sensitivity, and returns the
    /// full report only if it differs from the previously published one.
    pub fn sample_and_publish(&mut self, gt: &GroundTruth) -> Option<String> {
        let sensitivity = self.sensitivity;
        for node in gt.alive_nodes() {
            let series = self.free_hw.entry(node.id.clone()).or_default();
            series.push(node.free_hw as f64);
            if series.crosses(sensitivity) {
                series.publish();
            }
        }
        let measured = self.overlay.measured_pairs();
        for (a, b) in &measured {
            let Some(view) = gt.link(a, b).filter(|v| v.alive) else { continue };
            let key = (a.clone(), b.clone());
            let lat = self.latency.entry(key.clone()).or_default();
            lat.push(view.latency_ms);
            if lat.crosses(sensitivity) {
                lat.publish();
            }
            let bw = self.bandwidth.entry(key).or_default();
            bw.push(view.bandwidth_mbps);
            if bw.crosses(sensitivity) {
                bw.publish();
            }
        }

        let link_alive = |a: &NodeId, b: &NodeId| gt.link(a, b).is_some_and(|v| v.alive);
        let mut published: BTreeMap<NodePair, Measurement> = BTreeMap::new();
        for pair in &measured {
            if let (Some(l), Some(b)) = (
                self.latency.get(pair).and_then(MetricSeries::published),
                self.bandwidth.get(pair).and_then(MetricSeries::published),
            ) {
                published.insert(
                    pair.clone(),
                    Measurement {
                        latency_ms: l,
                        bandwidth_mbps: b,
                    },
                );
            }
        }

        let nodes: Vec<NodeState> = gt
            .nodes()
            .values()
            .map(|n| NodeState {
                id: n.id.clone(),
                free_hw: self
                    .free_hw
                    .get(&n.id)
                    .and_then(MetricSeries::published)
                    .map_or(0, |v| v.round().max(0.0) as u64),
                software: n.software.clone(),
                iot: n.iot.clone(),
                alive: n.alive,
            })
            .collect();
        let members: Vec<NodeId> = self.overlay.members().cloned().collect();
        let mut links = Vec::new();
        for a in &members {
            for b in &members {
                if a == b {
                    continue;
                }
                let pair = (a.clone(), b.clone());
                let (value, alive) = if measured.contains(&pair) {
                    (published.get(&pair).copied(), link_alive(a, b))
                } else {
                    let alive = self.segments(a, b).iter().all(|(x, y)| link_alive(x, y));
                    (estimate_qos(a, b, &self.overlay, &published).ok(), alive)
                };
                if let Some(m) = value {
                    links.push(LinkState {
                        src: a.clone(),
                        dst: b.clone(),
                        latency_ms: m.latency_ms,
                        bandwidth_mbps: m.bandwidth_mbps,
                        alive,
                    });
                }
            }
        }

        // The snapshot constructor would also mark links of dead nodes dead;
        // apply the same rule here so consumers see a normalized document.
        for l in &mut links {
            let up = |id: &NodeId| gt.node(id.as_str()).is_some_and(|n| n.alive);
            l.alive &= up(&l.src) && up(&l.dst);
        }

        if let Some(last) = &self.last {
            if last.nodes == nodes && last.links == links {
                return None;
            }
        }
        let report = InfrastructureReport {
            timestamp: self.last.as_ref().map_or(1, |r| r.timestamp + 1),
            nodes,
            links,
        };
        let json = report.to_json();
        self.last = Some(report);
        self.last_json = Some(json.clone());
        Some(json)
    }
}
