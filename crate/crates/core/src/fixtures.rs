//! The two-service `stackdemo` application used throughout the docs and
//! tests, with a small testbed that hosts it.

use crate::model::{load_spec, ApplicationSpec, InfrastructureSnapshot, LinkState, NodeState};

pub const STACKDEMO_COMPOSE: &str = r#"version: "3.3"

services:
  web:
    image: localhost:5000/stackdemo
    build: .
    ports:
      - "8000:8000"
  redis:
    image: redis:alpine
"#;

pub const STACKDEMO_REQUIREMENTS: &str = r#"services:
  redis:
    hardware: 6
    links:
      web:
        bandwidth: 20
        latency: 150
  web:
    hardware: 3
    links:
      redis:
        bandwidth: 50
        latency: 500
"#;

pub fn stackdemo_spec() -> ApplicationSpec {
    load_spec("stackdemo", STACKDEMO_COMPOSE.as_bytes(), Some(STACKDEMO_REQUIREMENTS.as_bytes()))
        .expect("fixture parses")
}

/// Two nodes with 8 units of free hardware each, so the two services cannot
/// share one.
pub fn two_node_testbed() -> InfrastructureSnapshot {
    InfrastructureSnapshot::new(
        0,
        [NodeState::new("n1", 8), NodeState::new("n2", 8)],
        [LinkState::new("n1", "n2", 100.0, 60.0), LinkState::new("n2", "n1", 100.0, 60.0)],
    )
    .expect("fixture is well formed")
}
