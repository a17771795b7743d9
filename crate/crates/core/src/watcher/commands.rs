//! Operator requests queued by the gateway and drained by the watcher.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::sources::FileUpdate;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Command {
    UpdateFiles {
        app_id: String,
        #[serde(flatten)]
        files: FileUpdate,
    },
    ExecApp {
        app_id: String,
    },
    RemoveApp {
        app_id: String,
    },
}

impl Command {
    pub fn app_id(&self) -> &str {
        match self {
            Command::UpdateFiles { app_id, .. } | Command::ExecApp { app_id } | Command::RemoveApp { app_id } => app_id,
        }
    }
}

/// FIFO shared by every producer and the single consumer. Cloning yields
/// another handle on the same queue.
#[derive(Clone, Debug, Default)]
pub struct CommandQueue {
    inner: Arc<Mutex<Inner>>,
}

#[derive(Debug, Default)]
struct Inner {
    items: VecDeque<Command>,
    enqueued: u64,
}

impl CommandQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the 1-based queue position of the new command. An
    /// `update_files` carrying no file is rejected.
    pub fn enqueue(&self, command: Command) -> Result<usize, Command> {
        if let Command::UpdateFiles { files, .. } = &command {
            if files.compose.is_none() && files.requirements.is_none() {
                return Err(command);
            }
        }
        let mut q = self.inner.lock().expect("queue lock");
        q.items.push_back(command);
        q.enqueued += 1;
        Ok(q.items.len())
    }

    pub fn drain(&self) -> Vec<Command> {
        self.inner.lock().expect("queue lock").items.drain(..).collect()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("queue lock").items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total commands ever accepted.
    pub fn enqueued(&self) -> u64 {
        self.inner.lock().expect("queue lock").enqueued
    }

    pub fn snapshot(&self) -> Vec<Command> {
        self.inner.lock().expect("queue lock").items.iter().cloned().collect()
    }
}
