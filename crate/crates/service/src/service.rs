//! Session operations. Each session is serialized behind its own lock; the
//! work itself runs on the blocking pool because model calls block.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::http::StatusCode;
use chrono::Utc;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use lanforge_core::gateway::{Backend, CancelToken, Gateway, GatewayError, RecordingBackend, Transcript};
use lanforge_core::model::{
    structural_issues, validate_lan, Agent, KnowledgeItem, KnowledgeOrigin, Lan, BLANK_OUTPUT, BLANK_SUBTASK,
};
use lanforge_core::runtime::{Executor, RunTrace};
use lanforge_core::update::{
    init_lan, Clock, EngineConfig, Intervention, LanChange, PipelineState, PipelineStatus, SupervisionPolicy,
    SystemClock, TrainingExample, UpdateEngine, Workspace,
};

use crate::error::ApiError;
use crate::session::{LanRevision, RevisionCause, Session, SessionEvent, SessionMeta};
use crate::store::{StorageError, Store};

/// Builds the model backend for a session, given its id.
pub type BackendFactory = Arc<dyn Fn(&str) -> Result<Arc<dyn Backend>, GatewayError> + Send + Sync>;

#[derive(Clone)]
pub struct ServiceConfig {
    pub engine: EngineConfig,
    pub clock: Arc<dyn Clock>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            engine: EngineConfig::default(),
            clock: Arc::new(SystemClock),
        }
    }
}

const EVENT_BUFFER: usize = 256;

struct View {
    revision: LanRevision,
    pipeline: Option<PipelineState>,
}

pub struct SessionSlot {
    data: Arc<tokio::sync::Mutex<Session>>,
    computing: AtomicBool,
    cancel: Mutex<Option<CancelToken>>,
    view: Mutex<View>,
    events: broadcast::Sender<SessionEvent>,
    seq: AtomicU64,
    backend: Mutex<Option<Arc<dyn Backend>>>,
    warnings: Vec<String>,
}

impl SessionSlot {
    fn new(session: Session, warnings: Vec<String>) -> Self {
        let view = View {
            revision: session.current().clone(),
            pipeline: session.pipeline.clone(),
        };
        Self {
            data: Arc::new(tokio::sync::Mutex::new(session)),
            computing: AtomicBool::new(false),
            cancel: Mutex::new(None),
            view: Mutex::new(view),
            events: broadcast::channel(EVENT_BUFFER).0,
            seq: AtomicU64::new(0),
            backend: Mutex::new(None),
            warnings,
        }
    }

    fn next_seq(&self) -> u64 {
        self.seq.fetch_add(1, Ordering::SeqCst) + 1
    }

    fn publish_pipeline(&self, computing: bool, state: Option<PipelineState>) {
        if !computing {
            self.view.lock().unwrap().pipeline = state.clone();
        }
        let _ = self.events.send(SessionEvent::Pipeline {
            seq: self.next_seq(),
            computing,
            state,
        });
    }

    fn publish_revision(&self, revision: &LanRevision) {
        self.view.lock().unwrap().revision = revision.clone();
        let _ = self.events.send(SessionEvent::Revision {
            seq: self.next_seq(),
            revision: revision.revision,
            cause: revision.cause,
        });
    }

    fn backend(&self, factory: &BackendFactory, id: &str) -> Result<Arc<dyn Backend>, ApiError> {
        let mut guard = self.backend.lock().unwrap();
        if let Some(b) = guard.as_ref() {
            return Ok(b.clone());
        }
        let b = factory(id).map_err(|e| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "backend_unavailable", e.to_string()))?;
        *guard = Some(b.clone());
        Ok(b)
    }

    pub fn is_computing(&self) -> bool {
        self.computing.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewSession {
    #[serde(alias = "task")]
    pub task_description: String,
    #[serde(alias = "input")]
    pub input_description: String,
    #[serde(alias = "output")]
    pub output_description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub id: String,
    pub task_description: String,
    pub revision: u64,
    pub pipeline_status: Option<PipelineStatus>,
    pub created_at: chrono::DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub meta: SessionMeta,
    pub revision: LanRevision,
    pub queue_length: usize,
    pub history_length: usize,
    pub pipeline_status: Option<PipelineStatus>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanUpdate {
    pub changed: bool,
    pub revision: LanRevision,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineView {
    pub revision: u64,
    pub computing: bool,
    pub state: Option<PipelineState>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevisionSummary {
    pub revision: u64,
    pub cause: RevisionCause,
    pub parent: Option<u64>,
    pub created_at: chrono::DateTime<Utc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<lanforge_core::update::Strategy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub example_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub trace_id: u64,
    pub trace: RunTrace,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NewAgent {
    pub name: String,
    #[serde(default)]
    pub subtask_description: Option<String>,
    #[serde(default)]
    pub output_description: Option<String>,
    #[serde(default)]
    pub cm_enabled: Option<bool>,
}

/// Editable agent fields; absent fields are left unchanged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentPatch {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub subtask_description: Option<String>,
    #[serde(default)]
    pub output_description: Option<String>,
    #[serde(default)]
    pub cm_enabled: Option<bool>,
    #[serde(default)]
    pub required_predecessors: Option<Vec<String>>,
    #[serde(default)]
    pub cm_knowledge: Option<Vec<String>>,
    #[serde(default)]
    pub em_knowledge: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRef {
    pub source: String,
    pub target: String,
}

/// A manual change to the network.
#[derive(Debug, Clone, PartialEq)]
pub enum LanEdit {
    Replace(Lan),
    AddAgent(NewAgent),
    PatchAgent(String, AgentPatch),
    DeleteAgent(String),
    AddEdge(EdgeRef),
    DeleteEdge(EdgeRef),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewExample {
    #[serde(default)]
    pub id: Option<String>,
    pub input: String,
    pub ground_truth: String,
}

enum PipelineOp {
    Start(TrainingExample, SupervisionPolicy),
    Confirm,
    Retry(Option<Intervention>),
    Abort,
}

pub struct Service {
    store: Store,
    backends: BackendFactory,
    config: ServiceConfig,
    sessions: RwLock<BTreeMap<String, Arc<SessionSlot>>>,
    warnings: Vec<String>,
}

/// Rejects networks that may not be saved.
pub fn check_lan(lan: &Lan) -> Result<(), ApiError> {
    let issues = structural_issues(lan);
    if !issues.is_empty() {
        return Err(ApiError::malformed_lan(&issues));
    }
    let violations = validate_lan(lan);
    if !violations.is_empty() {
        return Err(ApiError::invalid_lan(&violations));
    }
    Ok(())
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
}

fn set_knowledge(items: &mut Vec<KnowledgeItem>, texts: Vec<String>, now: chrono::DateTime<Utc>) {
    let old = std::mem::take(items);
    for text in texts.into_iter().map(|t| t.trim().to_string()).filter(|t| !t.is_empty()) {
        let item = old
            .iter()
            .find(|k| k.text == text)
            .cloned()
            .unwrap_or_else(|| KnowledgeItem::new(text, KnowledgeOrigin::User, now));
        items.push(item);
    }
}

impl Service {
    /// Opens the store and loads every session in it. Sessions that cannot be
    /// read at all are skipped and reported in [`Service::warnings`].
    pub fn open(store: Store, backends: BackendFactory, config: ServiceConfig) -> Result<Arc<Self>, StorageError> {
        let mut sessions = BTreeMap::new();
        let mut warnings = Vec::new();
        for id in store.session_ids()? {
            match store.load(&id) {
                Ok(loaded) => {
                    for w in &loaded.warnings {
                        tracing::warn!(session = %id, "{w}");
                    }
                    sessions.insert(id, Arc::new(SessionSlot::new(loaded.session, loaded.warnings)));
                }
                Err(e) => {
                    tracing::warn!(session = %id, error = %e, "session skipped");
                    warnings.push(format!("session {id} skipped: {e}"));
                }
            }
        }
        Ok(Arc::new(Self {
            store,
            backends,
            config,
            sessions: RwLock::new(sessions),
            warnings,
        }))
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))
    }

    /// Runs `f` with exclusive access to the session, on the blocking pool.
    async fn with_session<T, F>(self: &Arc<Self>, id: &str, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&Service, &SessionSlot, &mut Session) -> Result<T, ApiError> + Send + 'static,
    {
        let slot = self.slot(id)?;
        let mut guard = slot.data.clone().lock_owned().await;
        let svc = self.clone();
        tokio::task::spawn_blocking(move || f(&svc, &slot, &mut guard))
            .await
            .map_err(internal)?
    }

    fn refuse_while_computing(&self, id: &str) -> Result<(), ApiError> {
        if self.slot(id)?.is_computing() {
            return Err(ApiError::conflict("pipeline_computing", "a pipeline step is being computed; try again when it settles"));
        }
        Ok(())
    }

    pub fn list_sessions(&self) -> Vec<SessionSummary> {
        let sessions = self.sessions.read().unwrap();
        sessions
            .iter()
            .map(|(id, slot)| {
                let view = slot.view.lock().unwrap();
                let created_at = slot
                    .data
                    .try_lock()
                    .map(|s| s.meta.created_at)
                    .unwrap_or(view.revision.created_at);
                SessionSummary {
                    id: id.clone(),
                    task_description: view.revision.lan.task_description.clone(),
                    revision: view.revision.revision,
                    pipeline_status: view.pipeline.as_ref().map(|p| p.status),
                    created_at,
                }
            })
            .collect()
    }

    pub async fn create_session(self: &Arc<Self>, req: NewSession) -> Result<SessionView, ApiError> {
        let svc = self.clone();
        tokio::task::spawn_blocking(move || svc.create_session_blocking(req))
            .await
            .map_err(internal)?
    }

    fn create_session_blocking(&self, req: NewSession) -> Result<SessionView, ApiError> {
        let lan = init_lan(&req.task_description, &req.input_description, &req.output_description)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_session", e.to_string()))?;
        check_lan(&lan)?;
        let now = self.config.clock.now();
        let meta = SessionMeta {
            id: uuid::Uuid::new_v4().to_string(),
            task_description: req.task_description,
            input_description: req.input_description,
            output_description: req.output_description,
            created_at: now,
        };
        let session = Session {
            revisions: vec![LanRevision {
                revision: 0,
                cause: RevisionCause::Init,
                parent: None,
                created_at: now,
                strategy: None,
                example_id: None,
                lan,
            }],
            meta,
            queue: Vec::new(),
            history: Vec::new(),
            pipeline: None,
        };
        self.store.save(&session)?;
        let view = Self::session_view(&session, &[]);
        self.sessions
            .write()
            .unwrap()
            .insert(session.meta.id.clone(), Arc::new(SessionSlot::new(session, Vec::new())));
        Ok(view)
    }

    fn session_view(s: &Session, warnings: &[String]) -> SessionView {
        SessionView {
            meta: s.meta.clone(),
            revision: s.current().clone(),
            queue_length: s.queue.len(),
            history_length: s.history.len(),
            pipeline_status: s.pipeline.as_ref().map(|p| p.status),
            warnings: warnings.to_vec(),
        }
    }

    pub async fn session(self: &Arc<Self>, id: &str) -> Result<SessionView, ApiError> {
        self.with_session(id, |_, slot, s| Ok(Self::session_view(s, &slot.warnings))).await
    }

    /// The current network; answered without waiting for running work.
    pub fn lan(&self, id: &str) -> Result<LanRevision, ApiError> {
        Ok(self.slot(id)?.view.lock().unwrap().revision.clone())
    }

    pub async fn edit_lan(self: &Arc<Self>, id: &str, edit: LanEdit) -> Result<LanUpdate, ApiError> {
        self.refuse_while_computing(id)?;
        self.with_session(id, move |svc, slot, s| {
            let lan = svc.apply_edit(s.lan(), edit)?;
            svc.commit_manual(slot, s, lan)
        })
        .await
    }

    fn apply_edit(&self, current: &Lan, edit: LanEdit) -> Result<Lan, ApiError> {
        let mut lan = current.clone();
        let missing = |name: &str| ApiError::not_found(format!("no agent `{name}`"));
        match edit {
            LanEdit::Replace(new) => lan = new,
            LanEdit::AddAgent(a) => {
                let mut agent = Agent::new(
                    a.name,
                    a.subtask_description.unwrap_or_else(|| BLANK_SUBTASK.into()),
                    a.output_description.unwrap_or_else(|| BLANK_OUTPUT.into()),
                );
                if let Some(enabled) = a.cm_enabled {
                    agent.control.enabled = enabled;
                }
                lan.agents.push(agent);
            }
            LanEdit::PatchAgent(name, patch) => {
                let now = self.config.clock.now();
                let agent = lan.agent_mut(&name).ok_or_else(|| missing(&name))?;
                if let Some(v) = patch.subtask_description {
                    agent.execution.subtask_description = v;
                }
                if let Some(v) = patch.output_description {
                    agent.execution.output_description = v;
                }
                if let Some(v) = patch.cm_enabled {
                    agent.control.enabled = v;
                }
                if let Some(v) = patch.required_predecessors {
                    agent.control.required_predecessors = v;
                }
                if let Some(v) = patch.cm_knowledge {
                    set_knowledge(&mut agent.control.knowledge, v, now);
                }
                if let Some(v) = patch.em_knowledge {
                    set_knowledge(&mut agent.execution.knowledge, v, now);
                }
                if let Some(new_name) = patch.name.filter(|n| *n != name) {
                    lan.rename_agent(&name, &new_name);
                }
            }
            LanEdit::DeleteAgent(name) => {
                lan.remove_agent(&name).ok_or_else(|| missing(&name))?;
            }
            LanEdit::AddEdge(e) => {
                for n in [&e.source, &e.target] {
                    lan.agent(n).ok_or_else(|| missing(n))?;
                }
                if !lan.add_edge(&e.source, &e.target) {
                    return Err(ApiError::conflict("edge_exists", format!("edge {} -> {} already exists", e.source, e.target)));
                }
            }
            LanEdit::DeleteEdge(e) => {
                if !lan.remove_edge(&e.source, &e.target) {
                    return Err(ApiError::not_found(format!("no edge {} -> {}", e.source, e.target)));
                }
            }
        }
        Ok(lan)
    }

    fn push_revision(
        &self,
        slot: &SessionSlot,
        s: &mut Session,
        lan: Lan,
        cause: RevisionCause,
        strategy: Option<lanforge_core::update::Strategy>,
        example_id: Option<String>,
    ) -> Result<LanRevision, ApiError> {
        check_lan(&lan)?;
        let parent = s.current().revision;
        let revision = LanRevision {
            revision: parent + 1,
            cause,
            parent: Some(parent),
            created_at: self.config.clock.now(),
            strategy,
            example_id,
            lan,
        };
        self.store.write_revision(&s.meta.id, &revision)?;
        s.revisions.push(revision.clone());
        slot.publish_revision(&revision);
        Ok(revision)
    }

    fn commit_manual(&self, slot: &SessionSlot, s: &mut Session, lan: Lan) -> Result<LanUpdate, ApiError> {
        check_lan(&lan)?;
        if &lan == s.lan() {
            return Ok(LanUpdate {
                changed: false,
                revision: s.current().clone(),
            });
        }
        let revision = self.push_revision(slot, s, lan, RevisionCause::ManualEdit, None, None)?;
        if let Some(mut p) = s.pipeline.clone().filter(|p| p.status == PipelineStatus::AwaitingConfirmation) {
            p.mark_stale();
            self.store.write_pipeline(&s.meta.id, revision.revision, Some(&p))?;
            s.pipeline = Some(p.clone());
            slot.publish_pipeline(false, Some(p));
        }
        Ok(LanUpdate { changed: true, revision })
    }

    fn recording_gateway(&self, slot: &SessionSlot, id: &str) -> Result<(Arc<RecordingBackend>, CancelToken), ApiError> {
        let backend = slot.backend(&self.backends, id)?;
        let cancel = CancelToken::new();
        *slot.cancel.lock().unwrap() = Some(cancel.clone());
        Ok((Arc::new(RecordingBackend::new(backend)), cancel))
    }

    fn save_transcript(&self, id: &str, transcript: &Transcript) -> Result<(), ApiError> {
        if !transcript.is_empty() {
            self.store.write_transcript(id, transcript)?;
        }
        Ok(())
    }

    pub async fn run(self: &Arc<Self>, id: &str, input: String) -> Result<RunResult, ApiError> {
        self.with_session(id, move |svc, slot, s| {
            let (rec, cancel) = svc.recording_gateway(slot, &s.meta.id)?;
            let gw = Gateway::new(rec.clone()).with_cancel(cancel);
            let outcome = Executor::new(&gw).with_config(svc.config.engine.run.clone()).run_lan(s.lan(), &input);
            *slot.cancel.lock().unwrap() = None;
            svc.save_transcript(&s.meta.id, &rec.transcript())?;
            let trace = outcome?;
            let trace_id = svc.store.write_trace(&s.meta.id, &trace)?;
            let _ = slot.events.send(SessionEvent::RunFinished {
                seq: slot.next_seq(),
                trace_id,
                final_output: trace.final_output.clone(),
            });
            Ok(RunResult { trace_id, trace })
        })
        .await
    }

    pub async fn trace(self: &Arc<Self>, id: &str, trace_id: u64) -> Result<RunTrace, ApiError> {
        self.slot(id)?;
        self.store
            .read_trace(id, trace_id)
            .map_err(|_| ApiError::not_found(format!("no trace {trace_id}")))
    }

    pub async fn examples(self: &Arc<Self>, id: &str) -> Result<Vec<TrainingExample>, ApiError> {
        self.with_session(id, |_, _, s| Ok(s.queue.clone())).await
    }

    pub async fn add_example(self: &Arc<Self>, id: &str, req: NewExample) -> Result<TrainingExample, ApiError> {
        self.with_session(id, move |svc, _, s| {
            let id = match req.id.map(|i| i.trim().to_string()).filter(|i| !i.is_empty()) {
                Some(i) => i,
                None => (s.queue.len() + 1..)
                    .map(|n| format!("ex{n}"))
                    .find(|c| !s.queue.iter().any(|e| &e.id == c))
                    .expect("unbounded"),
            };
            if s.queue.iter().any(|e| e.id == id) {
                return Err(ApiError::conflict("example_exists", format!("example `{id}` already exists")));
            }
            let example = TrainingExample::new(id, req.input, req.ground_truth);
            example
                .validate()
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_example", e.to_string()))?;
            let mut queue = s.queue.clone();
            queue.push(example.clone());
            svc.store.write_queue(&s.meta.id, &queue)?;
            s.queue = queue;
            Ok(example)
        })
        .await
    }

    pub fn pipeline(&self, id: &str) -> Result<PipelineView, ApiError> {
        let slot = self.slot(id)?;
        let view = slot.view.lock().unwrap();
        Ok(PipelineView {
            revision: view.revision.revision,
            computing: slot.is_computing(),
            state: view.pipeline.clone(),
        })
    }

    pub async fn start(self: &Arc<Self>, id: &str, example_id: String, policy: SupervisionPolicy) -> Result<PipelineView, ApiError> {
        self.refuse_while_computing(id)?;
        self.with_session(id, move |svc, slot, s| {
            if s.pipeline_active() {
                return Err(ApiError::conflict("pipeline_active", "a pipeline is already running; finish or abort it first"));
            }
            let example = s
                .queue
                .iter()
                .find(|e| e.id == example_id)
                .cloned()
                .ok_or_else(|| ApiError::not_found(format!("no training example `{example_id}`")))?;
            svc.drive(slot, s, PipelineOp::Start(example, policy))
        })
        .await
    }

    pub async fn confirm(self: &Arc<Self>, id: &str) -> Result<PipelineView, ApiError> {
        self.refuse_while_computing(id)?;
        self.with_session(id, |svc, slot, s| svc.drive(slot, s, PipelineOp::Confirm)).await
    }

    pub async fn retry(self: &Arc<Self>, id: &str, intervention: Option<Intervention>) -> Result<PipelineView, ApiError> {
        self.refuse_while_computing(id)?;
        self.with_session(id, move |svc, slot, s| svc.drive(slot, s, PipelineOp::Retry(intervention))).await
    }

    /// Aborts the pipeline. A step being computed is cancelled first.
    pub async fn abort(self: &Arc<Self>, id: &str) -> Result<PipelineView, ApiError> {
        let slot = self.slot(id)?;
        let cancelled = match slot.cancel.lock().unwrap().as_ref() {
            Some(token) if slot.is_computing() => {
                token.cancel();
                true
            }
            _ => false,
        };
        self.with_session(id, move |svc, slot, s| {
            if cancelled && s.pipeline.as_ref().is_some_and(|p| p.status == PipelineStatus::Aborted) {
                return Ok(svc.pipeline_view(slot, s));
            }
            svc.drive(slot, s, PipelineOp::Abort)
        })
        .await
    }

    fn pipeline_view(&self, slot: &SessionSlot, s: &Session) -> PipelineView {
        PipelineView {
            revision: s.current().revision,
            computing: slot.is_computing(),
            state: s.pipeline.clone(),
        }
    }

    fn drive(&self, slot: &SessionSlot, s: &mut Session, op: PipelineOp) -> Result<PipelineView, ApiError> {
        let mut state = match (&op, &s.pipeline) {
            (PipelineOp::Start(..), _) => None,
            (_, Some(p)) => Some(p.clone()),
            (_, None) => return Err(ApiError::conflict("no_pipeline", "no pipeline has been started")),
        };
        if let PipelineOp::Abort = op {
            let state = state.as_mut().expect("checked above");
            let engine_gw = Gateway::new(slot.backend(&self.backends, &s.meta.id)?);
            UpdateEngine::new(&engine_gw, &*self.config.clock).abort(state)?;
            self.settle(slot, s, None, state.clone(), None)?;
            return Ok(self.pipeline_view(slot, s));
        }

        let (rec, cancel) = self.recording_gateway(slot, &s.meta.id)?;
        slot.computing.store(true, Ordering::SeqCst);
        slot.publish_pipeline(true, s.pipeline.clone());
        let result = (|| -> Result<(), ApiError> {
            let gw = Gateway::new(rec.clone()).with_cancel(cancel);
            let engine = UpdateEngine::new(&gw, &*self.config.clock).with_config(self.config.engine.clone());
            let mut ws = Workspace {
                lan: s.lan().clone(),
                history: s.history.clone(),
            };
            let mut current = match op {
                PipelineOp::Start(example, policy) => {
                    let (st, change) = engine.start(&mut ws, example, policy)?;
                    self.settle(slot, s, Some(&ws), st.clone(), change)?;
                    st
                }
                PipelineOp::Confirm => {
                    let mut st = state.take().expect("checked above");
                    let change = engine.confirm(&mut ws, &mut st)?;
                    self.settle(slot, s, Some(&ws), st.clone(), change)?;
                    st
                }
                PipelineOp::Retry(iv) => {
                    let mut st = state.take().expect("checked above");
                    let change = engine.retry(&mut ws, &mut st, iv.as_ref())?;
                    self.settle(slot, s, Some(&ws), st.clone(), change)?;
                    st
                }
                PipelineOp::Abort => unreachable!("handled above"),
            };
            while current.policy == SupervisionPolicy::AutoConfirm && current.status == PipelineStatus::AwaitingConfirmation {
                let change = engine.confirm(&mut ws, &mut current)?;
                self.settle(slot, s, Some(&ws), current.clone(), change)?;
            }
            Ok(())
        })();
        slot.computing.store(false, Ordering::SeqCst);
        *slot.cancel.lock().unwrap() = None;
        let saved = self.save_transcript(&s.meta.id, &rec.transcript());
        slot.publish_pipeline(false, s.pipeline.clone());
        result?;
        saved?;
        Ok(self.pipeline_view(slot, s))
    }

    /// Persists one pipeline transition and the network change it made.
    fn settle(
        &self,
        slot: &SessionSlot,
        s: &mut Session,
        ws: Option<&Workspace>,
        state: PipelineState,
        change: Option<LanChange>,
    ) -> Result<(), ApiError> {
        if let (Some(change), Some(ws)) = (change, ws) {
            let (cause, strategy) = match change {
                LanChange::Strategy(st) => (RevisionCause::Strategy, Some(st)),
                LanChange::RecordSuccess => (RevisionCause::RecordSuccess, None),
            };
            if &ws.lan != s.lan() {
                self.push_revision(slot, s, ws.lan.clone(), cause, strategy, Some(state.example.id.clone()))?;
            }
            self.store.write_history(&s.meta.id, &ws.history)?;
            s.history = ws.history.clone();
        }
        self.store.write_pipeline(&s.meta.id, s.current().revision, Some(&state))?;
        s.pipeline = Some(state.clone());
        slot.publish_pipeline(false, Some(state));
        Ok(())
    }

    pub async fn revisions(self: &Arc<Self>, id: &str) -> Result<Vec<RevisionSummary>, ApiError> {
        self.with_session(id, |_, _, s| {
            Ok(s.revisions
                .iter()
                .map(|r| RevisionSummary {
                    revision: r.revision,
                    cause: r.cause,
                    parent: r.parent,
                    created_at: r.created_at,
                    strategy: r.strategy,
                    example_id: r.example_id.clone(),
                })
                .collect())
        })
        .await
    }

    pub async fn revision(self: &Arc<Self>, id: &str, n: u64) -> Result<LanRevision, ApiError> {
        self.with_session(id, move |_, _, s| {
            s.revisions
                .get(n as usize)
                .cloned()
                .ok_or_else(|| ApiError::not_found(format!("no revision {n}")))
        })
        .await
    }

    /// A snapshot event followed by a live subscription.
    pub fn subscribe(&self, id: &str) -> Result<(SessionEvent, broadcast::Receiver<SessionEvent>), ApiError> {
        let slot = self.slot(id)?;
        let rx = slot.events.subscribe();
        let view = slot.view.lock().unwrap();
        let snapshot = SessionEvent::Snapshot {
            seq: slot.seq.load(Ordering::SeqCst),
            revision: view.revision.revision,
            computing: slot.is_computing(),
            state: view.pipeline.clone(),
        };
        Ok((snapshot, rx))
    }

    /// The in-memory copy of a session, for comparison with what is on disk.
    pub async fn snapshot(self: &Arc<Self>, id: &str) -> Result<Session, ApiError> {
        self.with_session(id, |_, _, s| Ok(s.clone())).await
    }
}
