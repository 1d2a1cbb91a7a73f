use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use lanforge_core::model::Lan;
use lanforge_core::update::{HistoryEntry, PipelineState, Strategy, TrainingExample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub task_description: String,
    pub input_description: String,
    pub output_description: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevisionCause {
    Init,
    Strategy,
    ManualEdit,
    RecordSuccess,
}

/// One saved state of a session's network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanRevision {
    pub revision: u64,
    pub cause: RevisionCause,
    pub parent: Option<u64>,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example_id: Option<String>,
    #[serde(with = "document")]
    pub lan: Lan,
}

/// Networks inside revisions use the versioned document format.
pub(crate) mod document {
    use lanforge_core::model::{from_value, to_value, Lan};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use serde_json::Value;

    pub fn serialize<S: Serializer>(lan: &Lan, s: S) -> Result<S::Ok, S::Error> {
        to_value(lan).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Lan, D::Error> {
        from_value(Value::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub meta: SessionMeta,
    pub revisions: Vec<LanRevision>,
    pub queue: Vec<TrainingExample>,
    pub history: Vec<HistoryEntry>,
    pub pipeline: Option<PipelineState>,
}

impl Session {
    pub fn current(&self) -> &LanRevision {
        self.revisions.last().expect("a session always has its initial revision")
    }

    pub fn lan(&self) -> &Lan {
        &self.current().lan
    }

    pub fn pipeline_active(&self) -> bool {
        self.pipeline.as_ref().is_some_and(|p| !p.status.is_terminal())
    }
}

/// Pushed to event-stream subscribers after every change.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    /// The pipeline moved to a new state. `computing` is true while a step
    /// is being worked on; `state` is then the last settled state.
    Pipeline {
        seq: u64,
        computing: bool,
        state: Option<PipelineState>,
    },
    Revision {
        seq: u64,
        revision: u64,
        cause: RevisionCause,
    },
    RunFinished {
        seq: u64,
        trace_id: u64,
        final_output: String,
    },
    /// Sent first to each new subscriber: where the session stands now.
    Snapshot {
        seq: u64,
        revision: u64,
        computing: bool,
        state: Option<PipelineState>,
    },
}

impl SessionEvent {
    pub fn name(&self) -> &'static str {
        match self {
            SessionEvent::Pipeline { .. } => "pipeline",
            SessionEvent::Revision { .. } => "revision",
            SessionEvent::RunFinished { .. } => "run_finished",
            SessionEvent::Snapshot { .. } => "snapshot",
        }
    }

    pub fn seq(&self) -> u64 {
        match self {
            SessionEvent::Pipeline { seq, .. }
            | SessionEvent::Revision { seq, .. }
            | SessionEvent::RunFinished { seq, .. }
            | SessionEvent::Snapshot { seq, .. } => *seq,
        }
    }
}
