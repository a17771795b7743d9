//! The persisted orchestrator state and the store guarding it.
//!
//! Every process touching the state (CLI invocations, the daemon) takes an
//! exclusive `flock` on `state.lock` first. Writes go through a temporary
//! file and a rename, and bump `generation` so a running daemon notices
//! changes made behind its back.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io;
use std::os::fd::AsRawFd;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use edgearm::watcher::{write_atomic, WatcherState};
use serde::{Deserialize, Serialize};

use crate::GatewayError;

/// A report sequence number with the wall-clock time it was observed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub seq: u64,
    pub time: DateTime<Utc>,
}

impl Stamp {
    pub fn now(seq: u64) -> Self {
        Self { seq, time: Utc::now() }
    }
}

/// What the gateway remembers about a registered application.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppMeta {
    pub root: PathBuf,
    pub added_at: DateTime<Utc>,
    #[serde(default)]
    pub last_update: Option<Stamp>,
    /// Number of reasoning steps run for the app.
    #[serde(default)]
    pub steps: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub generation: u64,
    pub watcher: Option<WatcherState>,
    pub apps: BTreeMap<String, AppMeta>,
}

impl StateFile {
    pub fn roots(&self) -> BTreeMap<String, PathBuf> {
        self.apps.iter().map(|(a, m)| (a.clone(), m.root.clone())).collect()
    }
}

/// Holds the exclusive lock until dropped.
#[derive(Debug)]
pub struct StoreGuard {
    _file: File,
}

fn flock(file: &File, op: libc::c_int) -> io::Result<bool> {
    loop {
        // SAFETY: the descriptor is owned by `file` and stays open for the call.
        let rc = unsafe { libc::flock(file.as_raw_fd(), op) };
        if rc == 0 {
            return Ok(true);
        }
        let err = io::Error::last_os_error();
        match err.raw_os_error() {
            Some(libc::EINTR) => continue,
            Some(libc::EWOULDBLOCK) => return Ok(false),
            _ => return Err(err),
        }
    }
}

/// Takes an exclusive lock on `path`, blocking or not.
pub fn lock_file(path: &Path, block: bool) -> io::Result<Option<File>> {
    let file = OpenOptions::new().create(true).truncate(false).write(true).open(path)?;
    let op = if block { libc::LOCK_EX } else { libc::LOCK_EX | libc::LOCK_NB };
    Ok(flock(&file, op)?.then_some(file))
}

#[derive(Clone, Debug)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state_path(&self) -> PathBuf {
        self.dir.join("state.json")
    }

    pub fn lock(&self) -> Result<StoreGuard, GatewayError> {
        std::fs::create_dir_all(&self.dir)?;
        let file = lock_file(&self.dir.join("state.lock"), true)?.expect("blocking lock");
        Ok(StoreGuard { _file: file })
    }

    /// The stored state; a missing file is the empty state.
    pub fn load(&self, _guard: &StoreGuard) -> Result<StateFile, GatewayError> {
        match std::fs::read(self.state_path()) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|e| GatewayError::State(format!("{}: {e}", self.state_path().display()))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(StateFile::default()),
            Err(e) => Err(e.into()),
        }
    }

    /// Writes `state` with the next generation and returns that generation.
    pub fn save(&self, _guard: &StoreGuard, state: &mut StateFile) -> Result<u64, GatewayError> {
        let current = self.load(_guard)?.generation;
        state.generation = current.max(state.generation) + 1;
        let json = serde_json::to_vec_pretty(state).expect("state serializes");
        write_atomic(&self.state_path(), &json)?;
        Ok(state.generation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generations_increase() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path().join("s"));
        let guard = store.lock().unwrap();
        assert_eq!(store.load(&guard).unwrap(), StateFile::default());
        let mut s = StateFile::default();
        assert_eq!(store.save(&guard, &mut s).unwrap(), 1);
        let mut stale = StateFile::default();
        assert_eq!(store.save(&guard, &mut stale).unwrap(), 2);
        assert_eq!(store.load(&guard).unwrap().generation, 2);
    }

    #[test]
    fn second_lock_is_refused_without_blocking() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l");
        let held = lock_file(&path, false).unwrap();
        assert!(held.is_some());
        assert!(lock_file(&path, false).unwrap().is_none());
        drop(held);
        assert!(lock_file(&path, false).unwrap().is_some());
    }
}
