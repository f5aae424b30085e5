//! On-disk job store: a JSON index of job records plus one PNG per finished
//! job under `images/`. Image files are named by the SHA-256 of the owning
//! job id followed by the PNG bytes, so each file belongs to exactly one job.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;
use std::time::{SystemTime, UNIX_EPOCH};

use lgtm_core::GenerationRequest;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

const INDEX: &str = "index.json";
const IMAGES: &str = "images";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn can_become(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Queued, JobState::Running) | (JobState::Running, JobState::Done | JobState::Failed)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub request: GenerationRequest,
    pub state: JobState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub created_at_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at_ms: Option<u64>,
    /// Insertion order, used to replay queued jobs after a restart.
    pub sequence: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no job {0}")]
    NotFound(String),
    #[error("job {id} cannot move from {from:?} to {to:?}")]
    IllegalTransition { id: String, from: JobState, to: JobState },
    #[error(transparent)]
    Storage(#[from] Error),
}

pub struct JobStore {
    dir: PathBuf,
    jobs: RwLock<BTreeMap<String, Job>>,
    sequence: AtomicU64,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl JobStore {
    /// Opens (or creates) a store. Jobs left running by a previous process
    /// are marked failed; queued jobs are kept for the caller to re-enqueue.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let images = dir.join(IMAGES);
        std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
        let index = dir.join(INDEX);
        let mut jobs: BTreeMap<String, Job> = match std::fs::read(&index) {
            Ok(bytes) => serde_json::from_slice(&bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(Error::io(index, e)),
        };
        let mut interrupted = false;
        for job in jobs.values_mut().filter(|j| j.state == JobState::Running) {
            job.state = JobState::Failed;
            job.error = Some("interrupted by service restart".into());
            job.finished_at_ms = Some(now_ms());
            interrupted = true;
        }
        let next = jobs.values().map(|j| j.sequence + 1).max().unwrap_or(0);
        let store = Self { dir, jobs: RwLock::new(jobs), sequence: AtomicU64::new(next) };
        if interrupted {
            store.persist(&store.jobs.read().expect("job index poisoned"))?;
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn persist(&self, jobs: &BTreeMap<String, Job>) -> Result<()> {
        let path = self.dir.join(INDEX);
        let tmp = self.dir.join(format!("{INDEX}.tmp"));
        std::fs::write(&tmp, serde_json::to_vec_pretty(jobs)?).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    pub fn create(&self, request: GenerationRequest) -> Result<Job> {
        let sequence = self.sequence.fetch_add(1, Ordering::Relaxed);
        let created_at_ms = now_ms();
        let mut h = Sha256::new();
        h.update(request.fingerprint().as_bytes());
        h.update(created_at_ms.to_le_bytes());
        h.update(sequence.to_le_bytes());
        h.update(std::process::id().to_le_bytes());
        let id = hex(&h.finalize()[..12]);
        let job = Job {
            id: id.clone(),
            request,
            state: JobState::Queued,
            image: None,
            error: None,
            created_at_ms,
            started_at_ms: None,
            finished_at_ms: None,
            sequence,
        };
        let mut jobs = self.jobs.write().expect("job index poisoned");
        jobs.insert(id, job.clone());
        self.persist(&jobs)?;
        Ok(job)
    }

    pub fn get(&self, id: &str) -> Option<Job> {
        self.jobs.read().expect("job index poisoned").get(id).cloned()
    }

    pub fn queued_in_order(&self) -> Vec<String> {
        let jobs = self.jobs.read().expect("job index poisoned");
        let mut queued: Vec<&Job> = jobs.values().filter(|j| j.state == JobState::Queued).collect();
        queued.sort_by_key(|j| j.sequence);
        queued.into_iter().map(|j| j.id.clone()).collect()
    }

    fn transition(&self, id: &str, to: JobState, update: impl FnOnce(&mut Job)) -> Result<Job, StoreError> {
        let mut jobs = self.jobs.write().expect("job index poisoned");
        let job = jobs.get_mut(id).ok_or_else(|| StoreError::NotFound(id.to_owned()))?;
        if !job.state.can_become(to) {
            return Err(StoreError::IllegalTransition { id: id.to_owned(), from: job.state, to });
        }
        job.state = to;
        update(job);
        let snapshot = job.clone();
        self.persist(&jobs)?;
        Ok(snapshot)
    }

    pub fn mark_running(&self, id: &str) -> Result<Job, StoreError> {
        self.transition(id, JobState::Running, |j| j.started_at_ms = Some(now_ms()))
    }

    /// Stores the PNG and marks the job done.
    pub fn complete(&self, id: &str, png: &[u8]) -> Result<Job, StoreError> {
        let current = self.get(id).ok_or_else(|| StoreError::NotFound(id.to_owned()))?.state;
        if !current.can_become(JobState::Done) {
            return Err(StoreError::IllegalTransition { id: id.to_owned(), from: current, to: JobState::Done });
        }
        let mut h = Sha256::new();
        h.update(id.as_bytes());
        h.update(png);
        let image_id = hex(&h.finalize());
        let path = self.image_path(&image_id);
        std::fs::write(&path, png).map_err(|e| Error::io(&path, e))?;
        self.transition(id, JobState::Done, |j| {
            j.image = Some(image_id);
            j.finished_at_ms = Some(now_ms());
        })
    }

    pub fn fail(&self, id: &str, message: String) -> Result<Job, StoreError> {
        self.transition(id, JobState::Failed, |j| {
            j.error = Some(message);
            j.finished_at_ms = Some(now_ms());
        })
    }

    fn image_path(&self, image_id: &str) -> PathBuf {
        self.dir.join(IMAGES).join(format!("{image_id}.png"))
    }

    /// PNG bytes for an image id owned by a finished job.
    pub fn image(&self, image_id: &str) -> Result<Option<Vec<u8>>> {
        let owned = self
            .jobs
            .read()
            .expect("job index poisoned")
            .values()
            .any(|j| j.image.as_deref() == Some(image_id));
        if !owned {
            return Ok(None);
        }
        let path = self.image_path(image_id);
        std::fs::read(&path).map(Some).map_err(|e| Error::io(path, e))
    }
}
