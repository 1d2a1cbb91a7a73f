//! Growing a network from training examples: diagnosis steps, strategies,
//! consistency bookkeeping and the supervised pipeline that drives them.

mod consistency;
mod describe;
mod intervene;
mod pipeline;
mod plan;
mod reports;
mod steps;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

pub use consistency::{
    agent_name_for_task, apply_strategy, init_lan, pinned_replay, record_success, refresh_history,
    Applied, HistoryEntry, InitError,
};
pub use describe::{render_agent_description, render_lan_description};
pub use intervene::{
    apply_intervention, completion_prompt, contains_placeholder, merge_document, Intervention,
    InterventionError, MergeError, PLACEHOLDER,
};
pub use pipeline::{
    train_example, AbortReason, AutoConfirm, EngineConfig, LanChange, LogEntry, PipelineError,
    PipelineState, PipelineStatus, Review, StepIssue, Supervisor, SupervisionPolicy,
    TrainingOutcome, UpdateEngine, Workspace, DEFAULT_ITERATION_CAP,
};
pub use plan::{
    apply_structure, validate_plan, AddAgentParams, AddInputsParams, AgentSpec, KnowledgeParams,
    PlanIssue, PlanValidationError, SplitMode, SplitParams, StrategyPlan,
};
pub use reports::{
    route_agent_cause, route_cause, AgentCauseReport, AgentCauseType, CauseReport, CauseType,
    GapReport, NextStep, Selection, Strategy,
};
pub use steps::{
    agent_cause_schema, ask_document, cause_schema, check_satisfaction, compute_step, exact_match, gap_schema,
    interpret, judge_prompt, params_schema, step_prompt, step_schema, with_hint, Step, StepError,
    StepInputs, StepOutput, StepResults, StepValue,
};

/// An input paired with the output the network should produce for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub id: String,
    pub input: String,
    pub ground_truth: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExampleError {
    #[error("training example id is empty")]
    EmptyId,
    #[error("training example `{0}` has an empty input")]
    EmptyInput(String),
    #[error("training example `{0}` has an empty ground truth")]
    EmptyGroundTruth(String),
}

impl TrainingExample {
    pub fn new(id: impl Into<String>, input: impl Into<String>, ground_truth: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            input: input.into(),
            ground_truth: ground_truth.into(),
        }
    }

    pub fn validate(&self) -> Result<(), ExampleError> {
        if self.id.trim().is_empty() {
            return Err(ExampleError::EmptyId);
        }
        if self.input.trim().is_empty() {
            return Err(ExampleError::EmptyInput(self.id.clone()));
        }
        if self.ground_truth.trim().is_empty() {
            return Err(ExampleError::EmptyGroundTruth(self.id.clone()));
        }
        Ok(())
    }
}

/// Source of timestamps for knowledge items.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Always returns the same instant; used for reproducible documents.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl FixedClock {
    pub fn epoch() -> Self {
        Self(Utc.timestamp_opt(0, 0).single().expect("valid timestamp"))
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}
