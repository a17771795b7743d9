//! Starting, stopping and probing the background watcher process.
//!
//! A running daemon holds an exclusive lock on `watcher.lock` in the state
//! directory for its whole life and records its pid next to it, so liveness
//! never depends on a stale pid file.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::state::lock_file;
use crate::GatewayError;

pub fn lock_path(state_dir: &Path) -> PathBuf {
    state_dir.join("watcher.lock")
}

pub fn pid_path(state_dir: &Path) -> PathBuf {
    state_dir.join("watcher.pid")
}

pub fn log_path(state_dir: &Path) -> PathBuf {
    state_dir.join("watcher.log")
}

/// Pid of the running daemon, if any.
pub fn running(state_dir: &Path) -> Result<Option<u32>, GatewayError> {
    if !state_dir.exists() {
        return Ok(None);
    }
    if lock_file(&lock_path(state_dir), false)?.is_some() {
        return Ok(None);
    }
    let pid = std::fs::read_to_string(pid_path(state_dir))
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(0);
    Ok(Some(pid))
}

/// Held by the daemon; releasing it (or dying) marks the watcher stopped.
pub struct DaemonLock {
    _file: File,
    pid_file: PathBuf,
}

impl DaemonLock {
    pub fn acquire(state_dir: &Path) -> Result<Self, GatewayError> {
        std::fs::create_dir_all(state_dir)?;
        // Probes take the lock for an instant; only a lock held across
        // several attempts belongs to another daemon.
        let mut file = None;
        for _ in 0..20 {
            file = lock_file(&lock_path(state_dir), false)?;
            if file.is_some() {
                break;
            }
            std::thread::sleep(Duration::from_millis(50));
        }
        let Some(file) = file else {
            let pid = std::fs::read_to_string(pid_path(state_dir))
                .ok()
                .and_then(|s| s.trim().parse().ok())
                .unwrap_or(0);
            return Err(GatewayError::WatcherAlreadyRunning(pid));
        };
        let pid_file = pid_path(state_dir);
        std::fs::write(&pid_file, format!("{}\n", std::process::id()))?;
        Ok(Self { _file: file, pid_file })
    }
}

impl Drop for DaemonLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.pid_file);
    }
}

fn wait_until(timeout: Duration, mut done: impl FnMut() -> Result<bool, GatewayError>) -> Result<bool, GatewayError> {
    let deadline = Instant::now() + timeout;
    while Instant::now() < deadline {
        if done()? {
            return Ok(true);
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    done()
}

/// Spawns `exe <args> watcher run` detached from the terminal and waits
/// until it holds the daemon lock.
pub fn start(exe: &Path, args: &[String], state_dir: &Path) -> Result<u32, GatewayError> {
    if let Some(pid) = running(state_dir)? {
        return Err(GatewayError::WatcherAlreadyRunning(pid));
    }
    std::fs::create_dir_all(state_dir)?;
    let log = File::options().create(true).append(true).open(log_path(state_dir))?;
    let mut cmd = Command::new(exe);
    cmd.args(args)
        .args(["watcher", "run"])
        .stdin(Stdio::null())
        .stdout(log.try_clone()?)
        .stderr(log);
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }
    let mut child = cmd.spawn()?;
    let mut pid = None;
    let up = wait_until(Duration::from_secs(10), || {
        if let Some(status) = child.try_wait()? {
            return Err(GatewayError::State(format!(
                "watcher exited at startup ({status}); see {}",
                log_path(state_dir).display()
            )));
        }
        pid = running(state_dir)?.filter(|&p| p != 0);
        Ok(pid.is_some())
    })?;
    if !up {
        return Err(GatewayError::WatcherTimeout("start"));
    }
    Ok(pid.unwrap_or(child.id()))
}

/// Sends SIGTERM to the daemon and waits for it to release its lock.
pub fn stop(state_dir: &Path) -> Result<u32, GatewayError> {
    let Some(pid) = running(state_dir)? else {
        return Err(GatewayError::WatcherNotRunning);
    };
    if pid == 0 {
        return Err(GatewayError::State("watcher pid unknown".into()));
    }
    // SAFETY: plain syscall on a pid we read from the daemon's own pid file.
    if unsafe { libc::kill(pid as libc::pid_t, libc::SIGTERM) } != 0 {
        return Err(std::io::Error::last_os_error().into());
    }
    if !wait_until(Duration::from_secs(15), || Ok(running(state_dir)?.is_none()))? {
        return Err(GatewayError::WatcherTimeout("stop"));
    }
    Ok(pid)
}
