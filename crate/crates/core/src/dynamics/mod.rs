//! Seeded generators for the experimental setting: a regional testbed,
//! per-tick perturbations and failures, random commits of a demo
//! application, and whole scenario runs.

mod commits;
mod perturb;
mod rng;
mod scenario;
mod testbed;
mod world;

use thiserror::Error;

pub use commits::{demo_topology, CommitModel, DEMO_SERVICES};
pub use perturb::{perturb, Gaussian, PerturbationModel};
pub use rng::substream;
pub use scenario::{run_scenario, ScenarioConfig, ScenarioLog, ScenarioSummary, TickRecord};
pub use testbed::{build_testbed, build_testbed_with, node_ids, region_sizes, TestbedParams};
pub use world::SimulatedWorld;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("cannot spread {n_nodes} nodes over {n_regions} regions")]
    InvalidShape { n_nodes: usize, n_regions: usize },
    #[error("invalid scenario: {0}")]
    ConfigInvalid(String),
}
