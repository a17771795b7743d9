//! Continuous, QoS-aware placement and reconciliation of multi-service
//! applications over a monitored Cloud-Edge infrastructure.
//!
//! The crate is organised along the monitor / analyse / plan / execute loop:
//!
//! * [`overlay`] simulates a leader/follower monitoring overlay and publishes
//!   sensitivity-gated infrastructure reports;
//! * [`watcher`] polls application files, reports, placement drift and
//!   operator commands, and funnels triggers into reasoning steps;
//! * [`reasoner`] validates placements and re-places only the services that
//!   need it;
//! * [`reconciler`] turns placements into deploy / migrate / remove actions
//!   and applies them through a [`reconciler::Backend`];
//! * [`dynamics`] generates seeded perturbation and commit streams and runs
//!   whole scenarios.

pub mod dynamics;
pub mod fixtures;
pub mod model;
pub mod overlay;
pub mod reasoner;
pub mod reconciler;
pub mod watcher;
