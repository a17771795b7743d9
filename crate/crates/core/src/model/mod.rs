//! Domain types shared by every other module.

mod app;
pub mod config;
pub mod descriptors;
mod ids;
mod infra;
mod placement;
pub mod report;

use thiserror::Error;

pub use app::{ApplicationSpec, LinkRequirement, ServiceRequirement};
pub use config::{BackendKind, OrchestratorConfig, SimulationConfig, WatcherPeriods};
pub use descriptors::{COMPOSE_FILE, REQUIREMENTS_FILE, load_spec, merge_spec, parse_compose, parse_requirements, render_compose, render_requirements};
pub use ids::{NodeId, NodePair, ServiceId};
pub use infra::{InfrastructureSnapshot, LinkState, LinkView, NodeState};
pub use placement::{AllocationLedger, Placement};
pub use report::{parse_report, render_report, InfrastructureReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed descriptor: {0}")]
    MalformedDescriptor(String),
    #[error("service `{service}` has a negative {field} requirement")]
    NegativeRequirement { service: ServiceId, field: &'static str },
    #[error("service `{from}` requires a link to undeclared service `{to}`")]
    DanglingLinkTarget { from: ServiceId, to: ServiceId },
    #[error("service `{0}` declared twice")]
    DuplicateService(ServiceId),
    #[error("service `{0}` declares a link requirement to itself")]
    SelfLinkRequirement(ServiceId),
    #[error("node `{0}` appears twice in the snapshot")]
    DuplicateNode(NodeId),
    #[error("link {0}->{1} appears twice in the snapshot")]
    DuplicateLink(NodeId, NodeId),
    #[error("link endpoint `{0}` is not a known node")]
    UnknownLinkEndpoint(NodeId),
    #[error("self-link on `{0}` must not be stored")]
    SelfLink(NodeId),
    #[error("link {0}->{1} has a negative or NaN metric")]
    NegativeLinkMetric(NodeId, NodeId),
    #[error("malformed infrastructure report: {0}")]
    MalformedReport(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}
