use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use cobs_core::projection::pca_2d;
use cobs_core::{
    generate_ensemble, normalize, ActiveConfig, ActiveSession, ClusteringEnsemble, Constraint,
    Dataset, HyperGrid, LabelColumn, LoadOptions,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ApiError, ApiResult};
use crate::store::{valid_id, Store};

/// How a dataset upload is parsed; stored next to the raw bytes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub label: Option<LabelColumn>,
    pub header: Option<bool>,
    pub name: Option<String>,
}

impl DatasetMeta {
    fn options(&self) -> LoadOptions {
        LoadOptions {
            label: self.label.clone(),
            header: self.header,
            name: self.name.clone(),
        }
    }
}

pub struct DatasetEntry {
    pub id: String,
    /// Normalized; raw values stay available through `raw_row`.
    pub dataset: Dataset,
    pub projection: Vec<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// Answers may be left to the dataset's class labels.
    Labels,
    /// Every answer comes from the client.
    Interactive,
}

/// Everything needed to rebuild a session by replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionFile {
    pub id: String,
    pub dataset_id: String,
    pub ensemble_id: String,
    pub grid: HyperGrid,
    pub config: ActiveConfig,
    pub oracle: OracleKind,
    pub answers: Vec<Constraint>,
    pub created: u64,
    pub updated: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Generating,
    Idle,
    AwaitingAnswer,
    Done,
    Failed,
}

pub enum Phase {
    Generating,
    Ready(ActiveSession),
    Failed(String),
}

pub struct SessionEntry {
    pub file: SessionFile,
    pub phase: Phase,
}

impl SessionEntry {
    pub fn status(&self) -> Status {
        match &self.phase {
            Phase::Generating => Status::Generating,
            Phase::Failed(_) => Status::Failed,
            Phase::Ready(s) if s.pending().is_some() => Status::AwaitingAnswer,
            Phase::Ready(s) if s.is_finished() => Status::Done,
            Phase::Ready(_) => Status::Idle,
        }
    }

    pub fn ready(&mut self) -> ApiResult<&mut ActiveSession> {
        match &mut self.phase {
            Phase::Ready(s) => Ok(s),
            Phase::Generating => Err(ApiError::Conflict("ensemble is still being generated".into())),
            Phase::Failed(m) => Err(ApiError::Conflict(format!("ensemble generation failed: {m}"))),
        }
    }
}

enum Slot {
    Generating,
    Ready(Arc<ClusteringEnsemble>),
}

struct Inner {
    store: Store,
    datasets: RwLock<HashMap<String, Arc<DatasetEntry>>>,
    ensembles: Mutex<HashMap<String, Slot>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionEntry>>>>,
}

/// Shared service state. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

/// Parameters of `POST /sessions`.
#[derive(Clone, Debug, Deserialize)]
pub struct StartSession {
    pub dataset_id: String,
    #[serde(default)]
    pub grid: Option<HyperGrid>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub sample_size: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub oracle: Option<OracleKind>,
}

pub fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn short_hash(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(&h.finalize()[..8])
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl AppState {
    pub fn new(store: Store) -> Self {
        Self {
            inner: Arc::new(Inner {
                store,
                datasets: RwLock::default(),
                ensembles: Mutex::default(),
                sessions: RwLock::default(),
            }),
        }
    }

    pub fn store(&self) -> &Store {
        &self.inner.store
    }

    fn parse(id: &str, bytes: &[u8], meta: &DatasetMeta) -> ApiResult<DatasetEntry> {
        let d = cobs_core::data::read_dataset(bytes, &meta.options())?;
        let d = normalize(&d);
        let projection = pca_2d(&d);
        Ok(DatasetEntry {
            id: id.to_string(),
            dataset: d,
            projection,
        })
    }

    /// Parses, normalizes and stores an upload. Identical bytes and options
    /// give the same id.
    pub fn add_dataset(&self, bytes: &[u8], meta: DatasetMeta) -> ApiResult<Arc<DatasetEntry>> {
        if bytes.iter().all(|b| b.is_ascii_whitespace()) {
            return Err(ApiError::BadRequest("empty dataset".into()));
        }
        let meta_json = serde_json::to_vec(&(&meta.label, &meta.header))?;
        let id = short_hash(&[bytes, &meta_json]);
        if let Some(e) = self.inner.datasets.read().unwrap().get(&id) {
            return Ok(e.clone());
        }
        let entry = Arc::new(Self::parse(&id, bytes, &meta)?);
        self.inner.store.put_dataset(&id, bytes, &meta)?;
        self.inner.datasets.write().unwrap().insert(id, entry.clone());
        Ok(entry)
    }

    pub fn dataset(&self, id: &str) -> ApiResult<Arc<DatasetEntry>> {
        if let Some(e) = self.inner.datasets.read().unwrap().get(id) {
            return Ok(e.clone());
        }
        let missing = || ApiError::NotFound(format!("unknown dataset {id}"));
        if !valid_id(id) {
            return Err(missing());
        }
        let (bytes, meta) = self.inner.store.get_dataset(id)?.ok_or_else(missing)?;
        let entry = Arc::new(Self::parse(id, &bytes, &meta)?);
        self.inner.datasets.write().unwrap().insert(id.to_string(), entry.clone());
        Ok(entry)
    }

    fn ensemble_key(dataset_id: &str, grid: &HyperGrid) -> String {
        short_hash(&[dataset_id.as_bytes(), grid.fingerprint().as_bytes()])
    }

    /// Cached ensemble, loading it from the store if needed. `None` when it
    /// has never been generated; `Conflict` while it is being generated.
    fn cached_ensemble(&self, key: &str) -> ApiResult<Option<Arc<ClusteringEnsemble>>> {
        let mut slots = lock(&self.inner.ensembles);
        match slots.get(key) {
            Some(Slot::Ready(e)) => return Ok(Some(e.clone())),
            Some(Slot::Generating) => {
                return Err(ApiError::Conflict(
                    "an ensemble for this dataset and grid is already being generated".into(),
                ))
            }
            None => {}
        }
        if let Some(e) = self.inner.store.get_ensemble(key)? {
            let e = Arc::new(e);
            slots.insert(key.to_string(), Slot::Ready(e.clone()));
            return Ok(Some(e));
        }
        Ok(None)
    }

    pub fn start_session(&self, req: StartSession) -> ApiResult<Arc<Mutex<SessionEntry>>> {
        let entry = self.dataset(&req.dataset_id)?;
        let grid = req.grid.clone().unwrap_or_default();
        grid.validate()?;
        let defaults = ActiveConfig::default();
        let config = ActiveConfig {
            budget: req.budget.unwrap_or(defaults.budget),
            m: req.m.unwrap_or(defaults.m),
            sample_size: req.sample_size.unwrap_or(defaults.sample_size),
            seed: req.seed.unwrap_or(defaults.seed),
        };
        config.validate()?;
        let labeled = entry.dataset.labels().is_some();
        let oracle = req
            .oracle
            .unwrap_or(if labeled { OracleKind::Labels } else { OracleKind::Interactive });
        if oracle == OracleKind::Labels && !labeled {
            return Err(ApiError::BadRequest(
                "dataset has no labels; use the interactive oracle".into(),
            ));
        }
        if entry.dataset.len() < 2 {
            return Err(ApiError::BadRequest("dataset needs at least two instances".into()));
        }

        let key = Self::ensemble_key(&entry.id, &grid);
        let t = now();
        let file = SessionFile {
            id: uuid::Uuid::new_v4().simple().to_string(),
            dataset_id: entry.id.clone(),
            ensemble_id: key.clone(),
            grid: grid.clone(),
            config,
            oracle,
            answers: Vec::new(),
            created: t,
            updated: t,
        };

        let phase = match self.cached_ensemble(&key)? {
            Some(e) => Phase::Ready(build_session(e, &entry.dataset, &file)?),
            None => {
                let mut slots = lock(&self.inner.ensembles);
                if slots.contains_key(&key) {
                    return Err(ApiError::Conflict(
                        "an ensemble for this dataset and grid is already being generated".into(),
                    ));
                }
                slots.insert(key.clone(), Slot::Generating);
                Phase::Generating
            }
        };
        let generating = matches!(phase, Phase::Generating);
        self.inner.store.put_session(&file)?;
        let id = file.id.clone();
        let session = Arc::new(Mutex::new(SessionEntry { file, phase }));
        self.inner.sessions.write().unwrap().insert(id, session.clone());
        if generating {
            self.spawn_generation(entry, grid, key, session.clone());
        }
        Ok(session)
    }

    fn spawn_generation(
        &self,
        entry: Arc<DatasetEntry>,
        grid: HyperGrid,
        key: String,
        session: Arc<Mutex<SessionEntry>>,
    ) {
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            let outcome = generate_ensemble(&entry.dataset, &grid)
                .map_err(|e| e.to_string())
                .and_then(|e| {
                    state.inner.store.put_ensemble(&key, &e).map_err(|e| e.to_string())?;
                    Ok(Arc::new(e))
                });
            let mut slots = lock(&state.inner.ensembles);
            let mut s = lock(&session);
            match outcome {
                Ok(e) => {
                    slots.insert(key, Slot::Ready(e.clone()));
                    s.phase = match build_session(e, &entry.dataset, &s.file) {
                        Ok(a) => Phase::Ready(a),
                        Err(err) => Phase::Failed(err.to_string()),
                    };
                }
                Err(msg) => {
                    log::error!("ensemble generation for {key} failed: {msg}");
                    slots.remove(&key);
                    s.phase = Phase::Failed(msg);
                }
            }
        });
    }

    /// Live session, or one rebuilt from its stored answer log.
    pub fn session(&self, id: &str) -> ApiResult<Arc<Mutex<SessionEntry>>> {
        if let Some(s) = self.inner.sessions.read().unwrap().get(id) {
            return Ok(s.clone());
        }
        let missing = || ApiError::NotFound(format!("unknown session {id}"));
        if !valid_id(id) {
            return Err(missing());
        }
        let file = self.inner.store.get_session(id)?.ok_or_else(missing)?;
        let entry = self.dataset(&file.dataset_id)?;
        let phase = match self.cached_ensemble(&file.ensemble_id) {
            Ok(Some(e)) => match ActiveSession::replay(e, &candidates(&entry.dataset), file.config, &file.answers) {
                Ok(s) => Phase::Ready(s),
                Err(err) => Phase::Failed(format!("replay failed: {err}")),
            },
            Ok(None) => Phase::Failed("ensemble missing from the store".into()),
            Err(_) => Phase::Generating,
        };
        let session = Arc::new(Mutex::new(SessionEntry { file, phase }));
        let mut map = self.inner.sessions.write().unwrap();
        Ok(map.entry(id.to_string()).or_insert(session).clone())
    }

    pub fn save_session(&self, s: &SessionFile) -> ApiResult<()> {
        Ok(self.inner.store.put_session(s)?)
    }
}

/// Every instance is a candidate; the service has no held-out split.
fn candidates(d: &Dataset) -> Vec<usize> {
    (0..d.len()).collect()
}

fn build_session(
    e: Arc<ClusteringEnsemble>,
    d: &Dataset,
    file: &SessionFile,
) -> cobs_core::Result<ActiveSession> {
    ActiveSession::replay(e, &candidates(d), file.config, &file.answers)
}

pub(crate) fn lock_session(s: &Mutex<SessionEntry>) -> std::sync::MutexGuard<'_, SessionEntry> {
    lock(s)
}
