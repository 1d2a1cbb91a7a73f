//! One directory per session:
//!
//! ```text
//! <root>/<id>/session.json
//!            /revisions/000000.json ...
//!            /queue.json
//!            /history.json
//!            /pipeline.json
//!            /traces/000001.json ...
//!            /transcripts/000001.jsonl ...
//!            /quarantine/
//! ```
//!
//! Every file is written to a temporary sibling, synced and renamed into place.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use lanforge_core::gateway::Transcript;
use lanforge_core::model::{structural_issues, validate_lan};
use lanforge_core::runtime::RunTrace;
use lanforge_core::update::{HistoryEntry, PipelineState, TrainingExample};

use crate::session::{LanRevision, Session, SessionMeta};

const SESSION_FILE: &str = "session.json";
const REVISIONS: &str = "revisions";
const QUEUE_FILE: &str = "queue.json";
const HISTORY_FILE: &str = "history.json";
const PIPELINE_FILE: &str = "pipeline.json";
const TRACES: &str = "traces";
const TRANSCRIPTS: &str = "transcripts";
const QUARANTINE: &str = "quarantine";
const TMP_MARK: &str = ".tmp-";

#[derive(Debug, thiserror::Error)]
pub enum StorageError {
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", .path.display())]
    Corrupt { path: PathBuf, message: String },
    #[error("{}: write interrupted before rename", .path.display())]
    Interrupted { path: PathBuf },
}

impl StorageError {
    pub fn path(&self) -> &Path {
        match self {
            StorageError::Io { path, .. } | StorageError::Corrupt { path, .. } | StorageError::Interrupted { path } => path,
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StorageError + '_ {
    move |source| StorageError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A simulated crash for tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// The write after `skip` successful ones leaves its temporary file and
    /// stops before the rename, as if the process had been killed.
    BeforeRename { skip: usize },
}

#[derive(Debug, Serialize, Deserialize)]
struct PipelineFile {
    /// Revision the state was computed against.
    revision: u64,
    state: PipelineState,
}

pub struct Store {
    root: PathBuf,
    fault: Mutex<Option<Fault>>,
    tmp_counter: AtomicU64,
}

/// A session read back from disk with whatever had to be set aside.
#[derive(Debug)]
pub struct Loaded {
    pub session: Session,
    pub warnings: Vec<String>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StorageError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io(&root))?;
        Ok(Self {
            root,
            fault: Mutex::new(None),
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn inject_fault(&self, fault: Option<Fault>) {
        *self.fault.lock().unwrap() = fault;
    }

    fn trip(&self) -> bool {
        let mut guard = self.fault.lock().unwrap();
        match *guard {
            Some(Fault::BeforeRename { skip: 0 }) => {
                *guard = None;
                true
            }
            Some(Fault::BeforeRename { skip }) => {
                *guard = Some(Fault::BeforeRename { skip: skip - 1 });
                false
            }
            None => false,
        }
    }

    /// Writes `bytes` to `path` atomically.
    pub fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<(), StorageError> {
        let dir = path.parent().expect("store paths have a parent");
        fs::create_dir_all(dir).map_err(io(dir))?;
        let name = path.file_name().expect("store paths name a file").to_string_lossy();
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = dir.join(format!(".{name}{TMP_MARK}{}-{n}", std::process::id()));
        {
            let mut f = File::create(&tmp).map_err(io(&tmp))?;
            f.write_all(bytes).map_err(io(&tmp))?;
            f.sync_all().map_err(io(&tmp))?;
        }
        if self.trip() {
            return Err(StorageError::Interrupted { path: path.to_path_buf() });
        }
        fs::rename(&tmp, path).map_err(io(path))?;
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
        Ok(())
    }

    fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> Result<(), StorageError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| StorageError::Corrupt {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        text.push('\n');
        self.write_atomic(path, text.as_bytes())
    }

    pub fn write_meta(&self, meta: &SessionMeta) -> Result<(), StorageError> {
        self.write_json(&self.session_dir(&meta.id).join(SESSION_FILE), meta)
    }

    pub fn write_revision(&self, id: &str, revision: &LanRevision) -> Result<(), StorageError> {
        let path = self.session_dir(id).join(REVISIONS).join(format!("{:06}.json", revision.revision));
        self.write_json(&path, revision)
    }

    pub fn write_queue(&self, id: &str, queue: &[TrainingExample]) -> Result<(), StorageError> {
        self.write_json(&self.session_dir(id).join(QUEUE_FILE), &queue)
    }

    pub fn write_history(&self, id: &str, history: &[HistoryEntry]) -> Result<(), StorageError> {
        self.write_json(&self.session_dir(id).join(HISTORY_FILE), &history)
    }

    pub fn write_pipeline(&self, id: &str, revision: u64, state: Option<&PipelineState>) -> Result<(), StorageError> {
        let path = self.session_dir(id).join(PIPELINE_FILE);
        match state {
            Some(state) => self.write_json(
                &path,
                &PipelineFile {
                    revision,
                    state: state.clone(),
                },
            ),
            None => match fs::remove_file(&path) {
                Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(io(&path)(e)),
                _ => Ok(()),
            },
        }
    }

    /// Saves a trace under the next free number and returns it.
    pub fn write_trace(&self, id: &str, trace: &RunTrace) -> Result<u64, StorageError> {
        let dir = self.session_dir(id).join(TRACES);
        let n = next_number(&dir)?;
        self.write_json(&dir.join(format!("{n:06}.json")), trace)?;
        Ok(n)
    }

    pub fn read_trace(&self, id: &str, n: u64) -> Result<RunTrace, StorageError> {
        read_json(&self.session_dir(id).join(TRACES).join(format!("{n:06}.json")))
    }

    pub fn write_transcript(&self, id: &str, transcript: &Transcript) -> Result<u64, StorageError> {
        let dir = self.session_dir(id).join(TRANSCRIPTS);
        let n = next_number(&dir)?;
        self.write_atomic(&dir.join(format!("{n:06}.jsonl")), transcript.to_jsonl().as_bytes())?;
        Ok(n)
    }

    /// Every recorded exchange of a session, in order.
    pub fn read_transcripts(&self, id: &str) -> Result<Transcript, StorageError> {
        let dir = self.session_dir(id).join(TRANSCRIPTS);
        let mut all = Transcript::new();
        for (_, path) in numbered(&dir, "jsonl")? {
            let t = Transcript::load(&path).map_err(|e| StorageError::Corrupt {
                path: path.clone(),
                message: e.to_string(),
            })?;
            all.exchanges.extend(t.exchanges);
        }
        Ok(all)
    }

    /// Session ids in the store, sorted.
    pub fn session_ids(&self) -> Result<Vec<String>, StorageError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io(&self.root))? {
            let entry = entry.map_err(io(&self.root))?;
            if entry.path().join(SESSION_FILE).is_file() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    fn quarantine(&self, id: &str, path: &Path, why: &str, warnings: &mut Vec<String>) {
        let qdir = self.session_dir(id).join(QUARANTINE);
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.f");
        let target = qdir.join(format!("{stamp}-{name}"));
        let moved = fs::create_dir_all(&qdir).and_then(|_| fs::rename(path, &target));
        match moved {
            Ok(()) => warnings.push(format!("{} quarantined ({why})", path.display())),
            Err(e) => warnings.push(format!("{} is unusable ({why}) and could not be moved: {e}", path.display())),
        }
    }

    /// Removes temporary files left by interrupted writes.
    fn sweep(&self, dir: &Path, warnings: &mut Vec<String>) {
        let Ok(entries) = fs::read_dir(dir) else { return };
        for entry in entries.flatten() {
            let path = entry.path();
            let name = entry.file_name().to_string_lossy().into_owned();
            if path.is_dir() && name != QUARANTINE {
                self.sweep(&path, warnings);
            } else if name.contains(TMP_MARK) && fs::remove_file(&path).is_ok() {
                warnings.push(format!("removed unfinished write {}", path.display()));
            }
        }
    }

    /// Reads a session back. Corrupted files are moved to `quarantine/` and
    /// reported as warnings; only a missing or unreadable initial state fails.
    pub fn load(&self, id: &str) -> Result<Loaded, StorageError> {
        let dir = self.session_dir(id);
        let mut warnings = Vec::new();
        self.sweep(&dir, &mut warnings);
        let meta: SessionMeta = read_json(&dir.join(SESSION_FILE))?;

        let mut revisions: Vec<LanRevision> = Vec::new();
        let mut broken = false;
        for (n, path) in numbered(&dir.join(REVISIONS), "json")? {
            if broken {
                self.quarantine(id, &path, "follows a damaged revision", &mut warnings);
                continue;
            }
            let expected = revisions.len() as u64;
            let problem = match read_json::<LanRevision>(&path) {
                Err(e) => Some(e.to_string()),
                Ok(r) if n != expected || r.revision != expected => Some(format!("expected revision {expected}")),
                Ok(r) if !validate_lan(&r.lan).is_empty() || !structural_issues(&r.lan).is_empty() => {
                    Some("network fails validation".into())
                }
                Ok(r) => {
                    revisions.push(r);
                    None
                }
            };
            if let Some(why) = problem {
                broken = true;
                self.quarantine(id, &path, &why, &mut warnings);
            }
        }
        if revisions.is_empty() {
            return Err(StorageError::Corrupt {
                path: dir.join(REVISIONS),
                message: "no readable initial revision".into(),
            });
        }
        let current = revisions.len() as u64 - 1;

        let queue = self.optional(id, &dir.join(QUEUE_FILE), &mut warnings).unwrap_or_default();
        let history = self.optional(id, &dir.join(HISTORY_FILE), &mut warnings).unwrap_or_default();
        let pipeline = self
            .optional::<PipelineFile>(id, &dir.join(PIPELINE_FILE), &mut warnings)
            .map(|p| {
                let mut state = p.state;
                if p.revision != current {
                    state.mark_stale();
                    warnings.push(format!(
                        "pipeline was saved at revision {} but the network is at {current}; its step must be recomputed",
                        p.revision
                    ));
                }
                state
            });
        Ok(Loaded {
            session: Session {
                meta,
                revisions,
                queue,
                history,
                pipeline,
            },
            warnings,
        })
    }

    fn optional<T: DeserializeOwned>(&self, id: &str, path: &Path, warnings: &mut Vec<String>) -> Option<T> {
        if !path.exists() {
            return None;
        }
        match read_json(path) {
            Ok(v) => Some(v),
            Err(e) => {
                self.quarantine(id, path, &e.to_string(), warnings);
                None
            }
        }
    }

    /// Persists a whole session, as a fresh copy would be written.
    pub fn save(&self, session: &Session) -> Result<(), StorageError> {
        let id = &session.meta.id;
        for r in &session.revisions {
            self.write_revision(id, r)?;
        }
        self.write_meta(&session.meta)?;
        self.write_queue(id, &session.queue)?;
        self.write_history(id, &session.history)?;
        self.write_pipeline(id, session.current().revision, session.pipeline.as_ref())
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StorageError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| StorageError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Files named `<number>.<ext>` in `dir`, in numeric order.
fn numbered(dir: &Path, ext: &str) -> Result<Vec<(u64, PathBuf)>, StorageError> {
    let mut out = Vec::new();
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(io(dir)(e)),
    };
    for entry in entries {
        let path = entry.map_err(io(dir))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        if let Some(n) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse().ok()) {
            out.push((n, path));
        }
    }
    out.sort();
    Ok(out)
}

fn next_number(dir: &Path) -> Result<u64, StorageError> {
    let mut max = 0;
    for ext in ["json", "jsonl"] {
        if let Some((n, _)) = numbered(dir, ext)?.last() {
            max = max.max(*n);
        }
    }
    Ok(max + 1)
}
