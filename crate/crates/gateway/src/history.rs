//! Bounded time series served to the dashboard.

use std::collections::{BTreeMap, VecDeque};

use chrono::{DateTime, Utc};
use edgearm::model::{InfrastructureSnapshot, NodeId, NodePair};
use serde::{Deserialize, Serialize};

pub const DEFAULT_CAPACITY: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub seq: u64,
    pub time: DateTime<Utc>,
    pub value: f64,
}

/// Keeps the most recent `capacity` points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    capacity: usize,
    points: VecDeque<Point>,
}

impl Ring {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            points: VecDeque::new(),
        }
    }

    pub fn push(&mut self, point: Point) {
        if self.points.len() == self.capacity {
            self.points.pop_front();
        }
        self.points.push_back(point);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&Point> {
        self.points.back()
    }

    pub fn points(&self) -> Vec<Point> {
        self.points.iter().cloned().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct History {
    capacity: usize,
    pub nodes_alive: Ring,
    pub free_hw: BTreeMap<NodeId, Ring>,
    pub latency: BTreeMap<NodePair, Ring>,
    pub bandwidth: BTreeMap<NodePair, Ring>,
    pub services: Ring,
    last_report: Option<u64>,
}

impl History {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            nodes_alive: Ring::new(capacity),
            free_hw: BTreeMap::new(),
            latency: BTreeMap::new(),
            bandwidth: BTreeMap::new(),
            services: Ring::new(capacity),
            last_report: None,
        }
    }

    /// Records one point per series of a report, once per report sequence
    /// number. Returns whether anything was recorded.
    pub fn record_report(&mut self, snapshot: &InfrastructureSnapshot, time: DateTime<Utc>) -> bool {
        let seq = snapshot.timestamp();
        if self.last_report == Some(seq) {
            return false;
        }
        self.last_report = Some(seq);
        let cap = self.capacity;
        let point = |value: f64| Point { seq, time, value };
        self.nodes_alive.push(point(snapshot.alive_nodes().count() as f64));
        for (id, n) in snapshot.nodes() {
            self.free_hw.entry(id.clone()).or_insert_with(|| Ring::new(cap)).push(point(n.free_hw as f64));
        }
        for (key, l) in snapshot.links() {
            self.latency.entry(key.clone()).or_insert_with(|| Ring::new(cap)).push(point(l.latency_ms));
            self.bandwidth
                .entry(key.clone())
                .or_insert_with(|| Ring::new(cap))
                .push(point(l.bandwidth_mbps));
        }
        true
    }

    /// Records the deployed-service count unless it equals the last point.
    pub fn record_services(&mut self, seq: u64, count: usize, time: DateTime<Utc>) {
        if self.services.last().is_some_and(|p| p.value == count as f64) {
            return;
        }
        self.services.push(Point {
            seq,
            time,
            value: count as f64,
        });
    }
}

impl Default for History {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use edgearm::model::NodeState;

    #[test]
    fn ring_drops_oldest() {
        let mut r = Ring::new(3);
        for i in 0..5 {
            r.push(Point {
                seq: i,
                time: Utc::now(),
                value: i as f64,
            });
        }
        assert_eq!(r.points().iter().map(|p| p.seq).collect::<Vec<_>>(), [2, 3, 4]);
    }

    #[test]
    fn one_point_per_report() {
        let snap = InfrastructureSnapshot::new(7, [NodeState::new("a", 10)], []).unwrap();
        let mut h = History::new(10);
        assert!(h.record_report(&snap, Utc::now()));
        assert!(!h.record_report(&snap, Utc::now()));
        assert_eq!(h.free_hw["a"].len(), 1);
        h.record_services(7, 2, Utc::now());
        h.record_services(7, 2, Utc::now());
        h.record_services(8, 3, Utc::now());
        assert_eq!(h.services.len(), 2);
    }
}
