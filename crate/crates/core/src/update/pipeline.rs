//! The supervised update loop for one training example.
//!
//! Each model-computed step pauses with its result until it is confirmed,
//! retried (optionally with an intervention) or the pipeline is aborted.
//! Confirming the pending update commits it, re-runs the network and either
//! records the success or starts the next iteration.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::consistency::{apply_strategy, record_success, refresh_history, HistoryEntry};
use super::intervene::{apply_intervention, Intervention, InterventionError, MergeError};
use super::reports::{route_agent_cause, route_cause, NextStep, Strategy};
use super::steps::{
    check_satisfaction, compute_step, Step, StepError, StepInputs, StepOutput, StepResults,
    StepValue,
};
use super::{Clock, TrainingExample};
use crate::gateway::{Gateway, GatewayError};
use crate::model::{lmd, Lan};
use crate::runtime::{Executor, RunConfig, RunTrace, RuntimeError};

pub const DEFAULT_ITERATION_CAP: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupervisionPolicy {
    #[default]
    AutoConfirm,
    Interactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStatus {
    AwaitingConfirmation,
    Computing,
    Satisfied,
    Aborted,
}

impl PipelineStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, Self::Satisfied | Self::Aborted)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum AbortReason {
    IterationCapReached { cap: u32 },
    StepFailed { step: Step, message: String },
    Cancelled,
    UserRequest,
}

/// A failed step, kept on the state so the supervisor can intervene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepIssue {
    pub code: String,
    pub message: String,
}

impl StepIssue {
    fn from_error(e: &StepError) -> Self {
        let code = match e {
            StepError::Gateway(_) => "gateway",
            StepError::Format(_) => "format",
            StepError::UnknownReasonType { .. } => "unknown_reason_type",
            StepError::Rejected(_) => "rejected",
            StepError::Plan(_) => "plan_invalid",
            StepError::InvalidSelection { .. } => "invalid_selection",
            StepError::NotComputable(_) => "not_computable",
        };
        Self {
            code: code.into(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: u32,
    pub step: Step,
    pub result: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub example: TrainingExample,
    pub policy: SupervisionPolicy,
    pub iteration: u32,
    pub strategies_applied: u32,
    pub last_trace: RunTrace,
    pub current_step: Step,
    pub status: PipelineStatus,
    pub step_results: StepResults,
    /// Result of the current step, as shown for review.
    #[serde(default)]
    pub document: Option<Value>,
    /// The network the pending update would produce.
    #[serde(default)]
    pub pending_lan: Option<Lan>,
    /// Set when the network was edited after the current step was computed.
    #[serde(default)]
    pub stale: bool,
    #[serde(default)]
    pub error: Option<StepIssue>,
    #[serde(default)]
    pub abort_reason: Option<AbortReason>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub log: Vec<LogEntry>,
}

impl PipelineState {
    fn new(example: TrainingExample, policy: SupervisionPolicy, trace: RunTrace) -> Self {
        Self {
            example,
            policy,
            iteration: 1,
            strategies_applied: 0,
            last_trace: trace,
            current_step: Step::Gap,
            status: PipelineStatus::AwaitingConfirmation,
            step_results: StepResults::default(),
            document: None,
            pending_lan: None,
            stale: false,
            error: None,
            abort_reason: None,
            warnings: Vec::new(),
            log: Vec::new(),
        }
    }

    /// Invalidates the paused result after a manual edit of the network.
    pub fn mark_stale(&mut self) {
        if self.status == PipelineStatus::AwaitingConfirmation {
            self.stale = true;
        }
    }

    fn abort(&mut self, reason: AbortReason) {
        self.status = PipelineStatus::Aborted;
        self.abort_reason = Some(reason);
    }
}

/// The network being trained and the examples it already satisfies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub lan: Lan,
    pub history: Vec<HistoryEntry>,
}

impl Workspace {
    pub fn new(lan: Lan) -> Self {
        Self {
            lan,
            history: Vec::new(),
        }
    }
}

/// How an operation changed the workspace network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanChange {
    Strategy(Strategy),
    RecordSuccess,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Example(#[from] super::ExampleError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub iteration_cap: u32,
    pub run: RunConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            iteration_cap: DEFAULT_ITERATION_CAP,
            run: RunConfig::default(),
        }
    }
}

pub struct UpdateEngine<'a> {
    gateway: &'a Gateway,
    config: EngineConfig,
    clock: &'a dyn Clock,
}

enum RunOutcome {
    Satisfied,
    Unsatisfied,
}

impl<'a> UpdateEngine<'a> {
    pub fn new(gateway: &'a Gateway, clock: &'a dyn Clock) -> Self {
        Self {
            gateway,
            config: EngineConfig::default(),
            clock,
        }
    }

    pub fn with_config(mut self, config: EngineConfig) -> Self {
        self.config = config;
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    fn budget(&self) -> u32 {
        self.config.run.repair_budget
    }

    /// Runs the network on the example. A satisfied example is recorded
    /// straight away; otherwise the first step is computed.
    pub fn start(
        &self,
        ws: &mut Workspace,
        example: TrainingExample,
        policy: SupervisionPolicy,
    ) -> Result<(PipelineState, Option<LanChange>), PipelineError> {
        example.validate()?;
        let trace = self.run(&ws.lan, &example.input)?;
        let mut state = PipelineState::new(example, policy, trace);
        let change = match self.judge(ws, &mut state)? {
            RunOutcome::Satisfied => Some(LanChange::RecordSuccess),
            RunOutcome::Unsatisfied => {
                self.compute(ws, &mut state, Step::Gap, None);
                None
            }
        };
        Ok((state, change))
    }

    /// Accepts the current step's result and advances.
    pub fn confirm(&self, ws: &mut Workspace, state: &mut PipelineState) -> Result<Option<LanChange>, PipelineError> {
        self.ensure_paused(state)?;
        if state.stale {
            return Err(PipelineError::Conflict(
                "the network changed since this step was computed; retry to recompute it".into(),
            ));
        }
        if let Some(issue) = &state.error {
            return Err(PipelineError::Conflict(format!(
                "the {:?} step failed ({}); retry it, optionally with an intervention",
                state.current_step, issue.message
            )));
        }
        if let Some(doc) = state.document.clone() {
            state.log.push(LogEntry {
                iteration: state.iteration,
                step: state.current_step,
                result: doc,
            });
        }
        match state.current_step {
            Step::Gap => self.compute(ws, state, Step::Cause, None),
            Step::Cause => {
                let cause = state.step_results.cause.as_ref().expect("confirmed cause");
                match route_cause(cause) {
                    NextStep::AgentCause => self.compute(ws, state, Step::AgentCause, None),
                    NextStep::Params(selection) => {
                        state.step_results.selection = Some(selection);
                        self.compute(ws, state, Step::Params, None);
                    }
                }
            }
            Step::AgentCause => {
                let agent = state
                    .step_results
                    .cause
                    .as_ref()
                    .and_then(|c| c.agent_name.clone())
                    .expect("agent-level cause has an agent");
                let reason = state.step_results.agent_cause.as_ref().expect("confirmed").reason_type;
                state.step_results.selection = Some(route_agent_cause(&agent, reason));
                self.compute(ws, state, Step::Params, None);
            }
            Step::Params => self.prepare_apply(ws, state),
            Step::Apply => return self.commit(ws, state).map(Some),
            Step::Done => unreachable!("terminal states are rejected above"),
        }
        Ok(None)
    }

    /// Recomputes the current step, applying `intervention` when given.
    pub fn retry(
        &self,
        ws: &mut Workspace,
        state: &mut PipelineState,
        intervention: Option<&Intervention>,
    ) -> Result<Option<LanChange>, PipelineError> {
        self.ensure_paused(state)?;
        let intervention = intervention.filter(|i| !i.is_empty());
        if state.stale || state.error.as_ref().is_some_and(|e| e.code == "run_failed") {
            return self.restart(ws, state);
        }
        match (state.current_step, intervention) {
            (Step::Apply, Some(_)) => return Err(MergeError::NoTemplate(Step::Apply).into()),
            (Step::Apply, None) => self.prepare_apply(ws, state),
            (step, None) => self.compute(ws, state, step, None),
            (step, Some(iv)) => {
                let mut results = state.step_results.clone();
                results.truncate(step);
                let outcome = {
                    let inputs = StepInputs {
                        lan: &ws.lan,
                        example: &state.example,
                        trace: &state.last_trace,
                        results: &results,
                    };
                    apply_intervention(step, &inputs, state.document.as_ref(), iv, self.gateway, self.budget())
                };
                match outcome {
                    Err(InterventionError::Merge(m)) => return Err(m.into()),
                    Ok(out) => {
                        state.step_results = results;
                        self.store(state, step, out);
                    }
                    Err(InterventionError::Step { error, document }) => {
                        state.step_results = results;
                        self.fail(state, step, error, document);
                    }
                }
            }
        }
        Ok(None)
    }

    pub fn abort(&self, state: &mut PipelineState) -> Result<(), PipelineError> {
        if state.status.is_terminal() {
            return Err(PipelineError::Conflict(format!(
                "the pipeline has already finished ({:?})",
                state.status
            )));
        }
        state.abort(AbortReason::UserRequest);
        Ok(())
    }

    fn ensure_paused(&self, state: &PipelineState) -> Result<(), PipelineError> {
        match state.status {
            PipelineStatus::AwaitingConfirmation => Ok(()),
            PipelineStatus::Computing => Err(PipelineError::Conflict("a step is being computed".into())),
            s => Err(PipelineError::Conflict(format!("the pipeline has already finished ({s:?})"))),
        }
    }

    fn run(&self, lan: &Lan, input: &str) -> Result<RunTrace, RuntimeError> {
        Executor::new(self.gateway)
            .with_config(self.config.run.clone())
            .run_lan(lan, input)
    }

    /// Checks the last trace; records the success when satisfied.
    fn judge(&self, ws: &mut Workspace, state: &mut PipelineState) -> Result<RunOutcome, StepError> {
        let (ok, _) = check_satisfaction(&state.last_trace, &state.example, self.gateway, self.budget())?;
        if !ok {
            return Ok(RunOutcome::Unsatisfied);
        }
        ws.lan = record_success(&ws.lan, &state.last_trace, &state.example.id);
        let entry = HistoryEntry {
            example: state.example.clone(),
            trace: state.last_trace.clone(),
        };
        match ws.history.iter_mut().find(|h| h.example.id == entry.example.id) {
            Some(h) => *h = entry,
            None => ws.history.push(entry),
        }
        state.current_step = Step::Done;
        state.status = PipelineStatus::Satisfied;
        state.document = None;
        state.error = None;
        Ok(RunOutcome::Satisfied)
    }

    /// Re-runs the network and begins the iteration again from the first step.
    fn restart(&self, ws: &mut Workspace, state: &mut PipelineState) -> Result<Option<LanChange>, PipelineError> {
        state.stale = false;
        state.pending_lan = None;
        state.step_results = StepResults::default();
        match self.run(&ws.lan, &state.example.input) {
            Ok(trace) => state.last_trace = trace,
            Err(e) => {
                self.run_failed(state, e);
                return Ok(None);
            }
        }
        match self.judge(ws, state) {
            Ok(RunOutcome::Satisfied) => Ok(Some(LanChange::RecordSuccess)),
            Ok(RunOutcome::Unsatisfied) => {
                self.compute(ws, state, Step::Gap, None);
                Ok(None)
            }
            Err(e) => {
                self.fail(state, Step::Gap, e, None);
                Ok(None)
            }
        }
    }

    fn compute(&self, ws: &Workspace, state: &mut PipelineState, step: Step, hint: Option<&str>) {
        state.step_results.truncate(step);
        let outcome = {
            let inputs = StepInputs {
                lan: &ws.lan,
                example: &state.example,
                trace: &state.last_trace,
                results: &state.step_results,
            };
            compute_step(step, &inputs, self.gateway, self.budget(), hint)
        };
        match outcome {
            Ok(out) => self.store(state, step, out),
            Err((error, document)) => self.fail(state, step, error, document),
        }
    }

    fn store(&self, state: &mut PipelineState, step: Step, out: StepOutput) {
        let r = &mut state.step_results;
        match out.value {
            StepValue::Gap(g) => r.gap = Some(g),
            StepValue::Cause(c) => r.cause = Some(c),
            StepValue::AgentCause(c) => r.agent_cause = Some(c),
            StepValue::Plan(p) => r.plan = Some(p),
        }
        state.current_step = step;
        state.document = Some(out.document);
        state.pending_lan = None;
        state.error = None;
        state.stale = false;
        state.status = PipelineStatus::AwaitingConfirmation;
    }

    fn fail(&self, state: &mut PipelineState, step: Step, error: StepError, document: Option<Value>) {
        state.current_step = step;
        state.document = document;
        state.pending_lan = None;
        state.error = Some(StepIssue::from_error(&error));
        state.stale = false;
        if matches!(error, StepError::Gateway(GatewayError::Aborted)) {
            state.abort(AbortReason::Cancelled);
        } else if state.policy == SupervisionPolicy::AutoConfirm {
            state.abort(AbortReason::StepFailed {
                step,
                message: error.to_string(),
            });
        } else {
            state.status = PipelineStatus::AwaitingConfirmation;
        }
    }

    fn run_failed(&self, state: &mut PipelineState, error: RuntimeError) {
        state.current_step = Step::Gap;
        state.document = None;
        state.pending_lan = None;
        state.error = Some(StepIssue {
            code: "run_failed".into(),
            message: error.to_string(),
        });
        if matches!(
            error,
            RuntimeError::Aborted { .. } | RuntimeError::Gateway { source: GatewayError::Aborted, .. }
        ) {
            state.abort(AbortReason::Cancelled);
        } else if state.policy == SupervisionPolicy::AutoConfirm {
            state.abort(AbortReason::StepFailed {
                step: Step::Gap,
                message: error.to_string(),
            });
        } else {
            state.status = PipelineStatus::AwaitingConfirmation;
        }
    }

    /// Applies the confirmed plan to a copy of the network for review.
    fn prepare_apply(&self, ws: &Workspace, state: &mut PipelineState) {
        let plan = state.step_results.plan.clone().expect("confirmed plan");
        match apply_strategy(&ws.lan, &plan, &ws.history, self.gateway, &self.config.run, self.clock.now()) {
            Ok(applied) => {
                state.current_step = Step::Apply;
                state.document = Some(json!({
                    "strategy": plan.strategy(),
                    "parameters": plan.parameters(),
                    "lmd": lmd(&ws.lan, &applied.lan),
                    "warnings": applied.warnings,
                }));
                state.warnings.extend(applied.warnings);
                state.pending_lan = Some(applied.lan);
                state.error = None;
                state.stale = false;
                state.status = PipelineStatus::AwaitingConfirmation;
            }
            Err(e) => self.fail(state, Step::Apply, e, None),
        }
    }

    fn commit(&self, ws: &mut Workspace, state: &mut PipelineState) -> Result<LanChange, PipelineError> {
        let lan = state.pending_lan.take().expect("apply step holds the pending network");
        let strategy = state.step_results.plan.as_ref().expect("confirmed plan").strategy();
        ws.lan = lan;
        state.strategies_applied += 1;
        let warnings = refresh_history(&ws.lan, &mut ws.history);
        state.warnings.extend(warnings);
        state.document = None;
        let change = LanChange::Strategy(strategy);

        match self.run(&ws.lan, &state.example.input) {
            Ok(trace) => state.last_trace = trace,
            Err(e) => {
                self.run_failed(state, e);
                return Ok(change);
            }
        }
        match self.judge(ws, state) {
            Ok(RunOutcome::Satisfied) => {}
            Ok(RunOutcome::Unsatisfied) if state.iteration >= self.config.iteration_cap => {
                state.abort(AbortReason::IterationCapReached {
                    cap: self.config.iteration_cap,
                });
            }
            Ok(RunOutcome::Unsatisfied) => {
                state.iteration += 1;
                state.step_results = StepResults::default();
                self.compute(ws, state, Step::Gap, None);
            }
            Err(e) => self.fail(state, Step::Gap, e, None),
        }
        Ok(change)
    }
}

/// A supervisor's decision on a paused step.
#[derive(Debug, Clone, PartialEq)]
pub enum Review {
    Confirm,
    Retry(Option<Intervention>),
    Abort,
}

pub trait Supervisor {
    fn review(&mut self, state: &PipelineState) -> Review;
}

/// Confirms every step.
#[derive(Debug, Clone, Copy, Default)]
pub struct AutoConfirm;

impl Supervisor for AutoConfirm {
    fn review(&mut self, _state: &PipelineState) -> Review {
        Review::Confirm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingOutcome {
    pub state: PipelineState,
    pub changes: Vec<LanChange>,
}

impl TrainingOutcome {
    pub fn satisfied(&self) -> bool {
        self.state.status == PipelineStatus::Satisfied
    }
}

/// Runs the whole pipeline for one example. Under `auto_confirm` every step is
/// confirmed; under `interactive` the supervisor reviews each paused step.
pub fn train_example(
    engine: &UpdateEngine,
    ws: &mut Workspace,
    example: TrainingExample,
    policy: SupervisionPolicy,
    supervisor: &mut dyn Supervisor,
) -> Result<TrainingOutcome, PipelineError> {
    let (mut state, change) = engine.start(ws, example, policy)?;
    let mut changes: Vec<LanChange> = change.into_iter().collect();
    while state.status == PipelineStatus::AwaitingConfirmation {
        let review = match policy {
            SupervisionPolicy::AutoConfirm => Review::Confirm,
            SupervisionPolicy::Interactive => supervisor.review(&state),
        };
        let change = match review {
            Review::Confirm => engine.confirm(ws, &mut state)?,
            Review::Retry(iv) => engine.retry(ws, &mut state, iv.as_ref())?,
            Review::Abort => {
                engine.abort(&mut state)?;
                None
            }
        };
        changes.extend(change);
    }
    Ok(TrainingOutcome { state, changes })
}
