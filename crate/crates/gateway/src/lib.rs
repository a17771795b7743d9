//! The `edge-arm` front end: CLI operations over the persisted state, the
//! watcher daemon, and the HTTP API the dashboard polls.
//!
//! The HTTP layer only reads a view refreshed by the daemon and enqueues
//! commands; every mutation goes through the watcher.

pub mod api;
pub mod control;
pub mod daemon;
pub mod history;
pub mod session;
pub mod state;
pub mod status;

use std::path::PathBuf;

use thiserror::Error;

pub use api::{router, ApiState, ApiView, AppDetail, SharedView};
pub use daemon::Daemon;
pub use history::{History, Point, Ring};
pub use session::{Session, Target};
pub use state::{AppMeta, Stamp, StateFile, Store};
pub use status::AppStatus;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("unknown application `{0}`")]
    UnknownApp(String),
    #[error("no docker-compose.yml in {}", .0.display())]
    MissingDescriptor(PathBuf),
    #[error("the watcher is already running (pid {0})")]
    WatcherAlreadyRunning(u32),
    #[error("the watcher is not running")]
    WatcherNotRunning,
    #[error("watcher did not {0} in time")]
    WatcherTimeout(&'static str),
    #[error("corrupt state: {0}")]
    State(String),
    #[error(transparent)]
    Model(#[from] edgearm::model::ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
