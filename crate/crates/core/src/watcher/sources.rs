//! The things the watcher polls: application repositories and the
//! infrastructure report.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{COMPOSE_FILE, REQUIREMENTS_FILE};

/// Lower-case hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Raw descriptor bytes of one application. A missing requirements file is
/// not an error.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AppFiles {
    pub compose: Vec<u8>,
    pub requirements: Option<Vec<u8>>,
}

impl AppFiles {
    pub fn new(compose: impl Into<Vec<u8>>, requirements: Option<impl Into<Vec<u8>>>) -> Self {
        Self {
            compose: compose.into(),
            requirements: requirements.map(Into::into),
        }
    }

    pub fn digest(&self) -> AppDigest {
        AppDigest {
            compose: sha256_hex(&self.compose),
            requirements: self.requirements.as_deref().map(sha256_hex),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppDigest {
    pub compose: String,
    pub requirements: Option<String>,
}

/// Last seen hashes of every source.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDigest {
    pub apps: BTreeMap<String, AppDigest>,
    pub infra_report: Option<String>,
}

/// New file contents; at least one is set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compose: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requirements: Option<String>,
}

/// Registry of managed applications and their descriptor files.
pub trait AppRepository: Send {
    fn apps(&self) -> Vec<String>;
    fn contains(&self, app_id: &str) -> bool {
        self.apps().iter().any(|a| a == app_id)
    }
    fn read(&self, app_id: &str) -> io::Result<AppFiles>;
    fn write(&mut self, app_id: &str, update: &FileUpdate) -> io::Result<()>;
    fn forget(&mut self, app_id: &str);
}

fn unknown(app_id: &str) -> io::Error {
    io::Error::new(io::ErrorKind::NotFound, format!("unknown application `{app_id}`"))
}

/// Each application is a directory holding its two descriptor files.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsRepository {
    roots: BTreeMap<String, PathBuf>,
}

impl FsRepository {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_roots(roots: BTreeMap<String, PathBuf>) -> Self {
        Self { roots }
    }

    pub fn insert(&mut self, app_id: impl Into<String>, root: impl Into<PathBuf>) {
        self.roots.insert(app_id.into(), root.into());
    }

    pub fn root(&self, app_id: &str) -> Option<&Path> {
        self.roots.get(app_id).map(PathBuf::as_path)
    }

    pub fn roots(&self) -> &BTreeMap<String, PathBuf> {
        &self.roots
    }
}

impl AppRepository for FsRepository {
    fn apps(&self) -> Vec<String> {
        self.roots.keys().cloned().collect()
    }

    fn contains(&self, app_id: &str) -> bool {
        self.roots.contains_key(app_id)
    }

    fn read(&self, app_id: &str) -> io::Result<AppFiles> {
        let root = self.roots.get(app_id).ok_or_else(|| unknown(app_id))?;
        let compose = std::fs::read(root.join(COMPOSE_FILE))?;
        let requirements = match std::fs::read(root.join(REQUIREMENTS_FILE)) {
            Ok(b) => Some(b),
            Err(e) if e.kind() == io::ErrorKind::NotFound => None,
            Err(e) => return Err(e),
        };
        Ok(AppFiles { compose, requirements })
    }

    fn write(&mut self, app_id: &str, update: &FileUpdate) -> io::Result<()> {
        let root = self.roots.get(app_id).ok_or_else(|| unknown(app_id))?;
        if let Some(c) = &update.compose {
            write_atomic(&root.join(COMPOSE_FILE), c.as_bytes())?;
        }
        if let Some(r) = &update.requirements {
            write_atomic(&root.join(REQUIREMENTS_FILE), r.as_bytes())?;
        }
        Ok(())
    }

    fn forget(&mut self, app_id: &str) {
        self.roots.remove(app_id);
    }
}

/// Writes through a sibling temporary file so readers never see a torn file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Shared in-memory repository; clones see the same files.
#[derive(Clone, Debug, Default)]
pub struct MemoryRepository {
    files: Arc<Mutex<BTreeMap<String, AppFiles>>>,
}

impl MemoryRepository {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, app_id: impl Into<String>, files: AppFiles) {
        self.files.lock().expect("repository lock").insert(app_id.into(), files);
    }

    pub fn update<F: FnOnce(&mut AppFiles)>(&self, app_id: &str, f: F) {
        if let Some(files) = self.files.lock().expect("repository lock").get_mut(app_id) {
            f(files);
        }
    }
}

impl AppRepository for MemoryRepository {
    fn apps(&self) -> Vec<String> {
        self.files.lock().expect("repository lock").keys().cloned().collect()
    }

    fn read(&self, app_id: &str) -> io::Result<AppFiles> {
        self.files
            .lock()
            .expect("repository lock")
            .get(app_id)
            .cloned()
            .ok_or_else(|| unknown(app_id))
    }

    fn write(&mut self, app_id: &str, update: &FileUpdate) -> io::Result<()> {
        let mut files = self.files.lock().expect("repository lock");
        let f = files.get_mut(app_id).ok_or_else(|| unknown(app_id))?;
        if let Some(c) = &update.compose {
            f.compose = c.clone().into_bytes();
        }
        if let Some(r) = &update.requirements {
            f.requirements = Some(r.clone().into_bytes());
        }
        Ok(())
    }

    fn forget(&mut self, app_id: &str) {
        self.files.lock().expect("repository lock").remove(app_id);
    }
}

/// Where the latest published infrastructure report can be read.
pub trait ReportSource: Send {
    /// `None` until a report has been published.
    fn latest(&self) -> io::Result<Option<Vec<u8>>>;
}

#[derive(Clone, Debug)]
pub struct FileReport {
    path: PathBuf,
}

impl FileReport {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }
}

impl ReportSource for FileReport {
    fn latest(&self) -> io::Result<Option<Vec<u8>>> {
        match std::fs::read(&self.path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// In-memory report slot shared between a publisher and the watcher.
#[derive(Clone, Debug, Default)]
pub struct SharedReport {
    slot: Arc<Mutex<Option<Vec<u8>>>>,
}

impl SharedReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&self, report: impl Into<Vec<u8>>) {
        *self.slot.lock().expect("report lock") = Some(report.into());
    }
}

impl ReportSource for SharedReport {
    fn latest(&self) -> io::Result<Option<Vec<u8>>> {
        Ok(self.slot.lock().expect("report lock").clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_reference_vectors() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn fs_repository_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(COMPOSE_FILE), "services: {}\n").unwrap();
        let mut repo = FsRepository::new();
        repo.insert("app", dir.path());
        let files = repo.read("app").unwrap();
        assert!(files.requirements.is_none());
        repo.write(
            "app",
            &FileUpdate {
                compose: None,
                requirements: Some("x: {}\n".into()),
            },
        )
        .unwrap();
        let files = repo.read("app").unwrap();
        assert_eq!(files.requirements.as_deref(), Some(&b"x: {}\n"[..]));
        assert!(repo.read("other").is_err());
    }

    #[test]
    fn missing_report_file_is_none() {
        let dir = tempfile::tempdir().unwrap();
        assert!(FileReport::new(dir.path().join("r.json")).latest().unwrap().is_none());
    }
}
