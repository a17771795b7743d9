use rand_chacha::ChaCha8Rng;

use crate::overlay::{GroundTruth, OverlayMonitor};

use super::{perturb, substream, PerturbationModel};

/// A perturbed testbed observed through the monitoring overlay. Every
/// [`advance`](Self::advance) is one monitoring period; the first one sees
/// the unperturbed baseline.
#[derive(Debug)]
pub struct SimulatedWorld {
    baseline: GroundTruth,
    model: PerturbationModel,
    perturbing: bool,
    rng: ChaCha8Rng,
    monitor: OverlayMonitor,
    current: GroundTruth,
    ticks: u64,
}

impl SimulatedWorld {
    pub fn new(
        baseline: GroundTruth,
        model: PerturbationModel,
        perturbing: bool,
        seed: u64,
        sensitivity: f64,
        restructure_every: u64,
    ) -> Self {
        Self {
            current: baseline.clone(),
            baseline,
            model,
            perturbing,
            rng: substream(seed, "world"),
            monitor: OverlayMonitor::new(sensitivity, restructure_every),
            ticks: 0,
        }
    }

    /// Moves the world one period forward; returns the report if the
    /// monitor published one.
    pub fn advance(&mut self) -> Option<String> {
        let next = if self.ticks > 0 && self.perturbing {
            perturb(&self.baseline, &self.model, &mut self.rng)
        } else {
            self.baseline.clone()
        };
        self.current = next.with_timestamp(self.ticks);
        self.ticks += 1;
        self.monitor.tick(&self.current)
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.current
    }

    pub fn baseline(&self) -> &GroundTruth {
        &self.baseline
    }

    pub fn monitor(&self) -> &OverlayMonitor {
        &self.monitor
    }

    pub fn monitor_mut(&mut self) -> &mut OverlayMonitor {
        &mut self.monitor
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }
}
