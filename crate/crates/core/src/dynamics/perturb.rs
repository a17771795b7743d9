use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::{LinkState, NodeState};
use crate::overlay::GroundTruth;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub sd: f64,
}

impl Gaussian {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Normal::new(self.mean, self.sd)
            .expect("standard deviation is finite and non-negative")
            .sample(rng)
    }
}

/// Per-tick degradation of the baseline infrastructure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationModel {
    /// Hardware taken away per node, in MB.
    pub ram_cut: Gaussian,
    /// Latency added per link, in ms.
    pub latency_add: Gaussian,
    /// Share of a link's bandwidth taken away.
    pub bw_cut_fraction: Gaussian,
    /// Chance that a node or a link is down for one tick.
    pub failure_p: f64,
}

impl Default for PerturbationModel {
    fn default() -> Self {
        Self {
            ram_cut: Gaussian::new(750.0, 375.0),
            latency_add: Gaussian::new(50.0, 25.0),
            bw_cut_fraction: Gaussian::new(0.125, 0.0625),
            failure_p: 0.05,
        }
    }
}

impl PerturbationModel {
    pub fn validate(&self) -> Result<(), String> {
        for (name, g) in [
            ("ram_cut", self.ram_cut),
            ("latency_add", self.latency_add),
            ("bw_cut_fraction", self.bw_cut_fraction),
        ] {
            if !(g.mean.is_finite() && g.sd.is_finite() && g.sd >= 0.0) {
                return Err(format!("{name}: need finite mean and sd >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.failure_p) {
            return Err(format!("failure_p {} not in [0,1]", self.failure_p));
        }
        Ok(())
    }
}

/// One degraded copy of `baseline`.
///
/// Draw order is fixed: nodes in ascending id (hardware cut, then failure),
/// then links in ascending `(src, dst)` (latency, bandwidth, failure). Cuts
/// are clamped so no value goes below zero; elements that were down in the
/// baseline stay down.
pub fn perturb<R: Rng + ?Sized>(baseline: &GroundTruth, model: &PerturbationModel, rng: &mut R) -> GroundTruth {
    let nodes: Vec<NodeState> = baseline
        .nodes()
        .values()
        .map(|n| {
            let cut = model.ram_cut.sample(rng).clamp(0.0, n.free_hw as f64);
            let failed = rng.random_bool(model.failure_p);
            NodeState {
                free_hw: n.free_hw - cut.round() as u64,
                alive: n.alive && !failed,
                ..n.clone()
            }
        })
        .collect();
    let links: Vec<LinkState> = baseline
        .links()
        .values()
        .map(|l| {
            let latency = (l.latency_ms + model.latency_add.sample(rng)).max(0.0);
            let frac = model.bw_cut_fraction.sample(rng).clamp(0.0, 1.0);
            let failed = rng.random_bool(model.failure_p);
            LinkState {
                latency_ms: latency,
                bandwidth_mbps: (l.bandwidth_mbps * (1.0 - frac)).max(0.0),
                alive: l.alive && !failed,
                ..l.clone()
            }
        })
        .collect();
    GroundTruth::new(baseline.timestamp(), nodes, links).expect("perturbation keeps the snapshot well formed")
}
