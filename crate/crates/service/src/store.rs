//! Sessions on disk. Each session directory is a workbench bundle plus a
//! `session.json` status record.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use basecamp_workbench::bundle::{self, now, read_json, write_json, Bundle, Meta};
use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub const SESSION_FILE: &str = "session.json";
pub const SESSION_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionStatus {
    Annotating,
    Optimizing,
    Done,
    BelowThreshold,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub v: u32,
    pub session_id: String,
    pub status: SessionStatus,
    /// Fraction of the evaluation budget used by the current or last run.
    pub progress: f64,
    pub created: String,
    pub updated: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct Session {
    pub id: String,
    pub bundle: Bundle,
    record: Mutex<SessionRecord>,
    /// Evaluations done by the active run; the optimizer bumps it.
    pub evaluated: AtomicUsize,
    pub max_evals: AtomicUsize,
}

impl Session {
    fn new(bundle: Bundle, record: SessionRecord) -> Self {
        Session {
            id: record.session_id.clone(),
            bundle,
            record: Mutex::new(record),
            evaluated: AtomicUsize::new(0),
            max_evals: AtomicUsize::new(0),
        }
    }

    pub fn lock(&self) -> MutexGuard<'_, SessionRecord> {
        self.record.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// The record with live progress filled in for an active run.
    pub fn snapshot(&self) -> SessionRecord {
        let mut r = self.lock().clone();
        if r.status == SessionStatus::Optimizing {
            r.progress = self.live_progress();
        }
        r
    }

    fn live_progress(&self) -> f64 {
        let max = self.max_evals.load(Ordering::Relaxed);
        if max == 0 {
            return 0.0;
        }
        (self.evaluated.load(Ordering::Relaxed) as f64 / max as f64).min(1.0)
    }

    /// Stamps `updated` and writes the record through a rename, so a crash
    /// never leaves a torn session.json.
    pub fn persist(&self, record: &mut SessionRecord) -> Result<(), ServiceError> {
        record.updated = now();
        let tmp = self.bundle.path("session.json.tmp");
        write_json(&tmp, record)?;
        std::fs::rename(&tmp, self.bundle.path(SESSION_FILE))
            .map_err(|e| ServiceError::Internal(format!("cannot store session {}: {e}", self.id)))
    }
}

pub struct Store {
    root: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl Store {
    /// Loads every session under `<data_dir>/sessions`. A run that was
    /// active when the service stopped is marked Failed and its partial
    /// output removed.
    pub fn open(data_dir: &Path) -> Result<Store, ServiceError> {
        let root = data_dir.join("sessions");
        std::fs::create_dir_all(&root).map_err(|e| ServiceError::Internal(format!("{}: {e}", root.display())))?;
        let mut sessions = HashMap::new();
        let entries = std::fs::read_dir(&root).map_err(|e| ServiceError::Internal(format!("{}: {e}", root.display())))?;
        for entry in entries.flatten() {
            let dir = entry.path();
            if !dir.join(SESSION_FILE).is_file() {
                continue;
            }
            let record: SessionRecord = read_json(&dir.join(SESSION_FILE))?;
            let session = Session::new(Bundle { dir }, record);
            {
                let mut r = session.lock();
                if r.status == SessionStatus::Optimizing {
                    r.status = SessionStatus::Failed;
                    r.error = Some("optimization interrupted by a service restart".into());
                    let _ = std::fs::remove_file(session.bundle.path(bundle::RESULT));
                    session.persist(&mut r)?;
                }
            }
            sessions.insert(session.id.clone(), Arc::new(session));
        }
        Ok(Store {
            root,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn create(&self) -> Result<Arc<Session>, ServiceError> {
        let id = uuid::Uuid::new_v4().to_string();
        let bundle = Bundle::create(self.root.join(&id))?;
        write_json(&bundle.path(bundle::META), &Meta::new())?;
        let stamp = now();
        let mut record = SessionRecord {
            v: SESSION_VERSION,
            session_id: id.clone(),
            status: SessionStatus::Annotating,
            progress: 0.0,
            created: stamp.clone(),
            updated: stamp,
            error: None,
        };
        let session = Session::new(bundle, record.clone());
        session.persist(&mut record)?;
        *session.lock() = record;
        let session = Arc::new(session);
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, session.clone());
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Result<Arc<Session>, ServiceError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no session '{id}'")))
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
