//! Content-addressed file store: datasets, ensembles and session logs.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use cobs_core::ClusteringEnsemble;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::state::{DatasetMeta, SessionFile};

#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        for sub in ["datasets", "ensembles", "sessions"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, kind: &str, id: &str, ext: &str) -> PathBuf {
        self.root.join(kind).join(format!("{id}.{ext}"))
    }

    pub fn put_dataset(&self, id: &str, bytes: &[u8], meta: &DatasetMeta) -> io::Result<()> {
        write_atomic(&self.path("datasets", id, "csv"), bytes)?;
        write_json(&self.path("datasets", id, "json"), meta)
    }

    pub fn get_dataset(&self, id: &str) -> io::Result<Option<(Vec<u8>, DatasetMeta)>> {
        let csv = self.path("datasets", id, "csv");
        if !csv.exists() {
            return Ok(None);
        }
        let meta = read_json(&self.path("datasets", id, "json"))?;
        Ok(Some((fs::read(csv)?, meta)))
    }

    pub fn put_ensemble(&self, key: &str, e: &ClusteringEnsemble) -> io::Result<()> {
        write_json(&self.path("ensembles", key, "json"), e)
    }

    pub fn get_ensemble(&self, key: &str) -> io::Result<Option<ClusteringEnsemble>> {
        let p = self.path("ensembles", key, "json");
        if !p.exists() {
            return Ok(None);
        }
        read_json(&p).map(Some)
    }

    pub fn put_session(&self, s: &SessionFile) -> io::Result<()> {
        write_json(&self.path("sessions", &s.id, "json"), s)
    }

    pub fn get_session(&self, id: &str) -> io::Result<Option<SessionFile>> {
        let p = self.path("sessions", id, "json");
        if !p.exists() {
            return Ok(None);
        }
        read_json(&p).map(Some)
    }
}

/// Ids come from clients; only plain tokens may touch the filesystem.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    write_atomic(path, &serde_json::to_vec(value)?)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> io::Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}
