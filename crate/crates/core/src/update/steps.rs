//! Prompts, answer templates and interpretation of the four diagnosis steps,
//! plus the satisfaction judge.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::describe::{render_agent_description, render_lan_description};
use super::plan::{validate_plan, PlanValidationError, StrategyPlan};
use super::reports::{
    AgentCauseReport, AgentCauseType, CauseReport, CauseType, GapReport, Selection, Strategy,
};
use super::TrainingExample;
use crate::gateway::{CompletionRequest, Gateway, GatewayError, DETERMINISTIC_TEMPERATURE};
use crate::model::Lan;
use crate::runtime::{
    parse_or_reformat, CallRecord, FieldKind, FormatError, RepairError, ResponseSchema, RunTrace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Gap,
    Cause,
    AgentCause,
    Params,
    Apply,
    Done,
}

impl Step {
    /// Number used in call tags, for the four model-driven steps.
    pub fn number(self) -> Option<u8> {
        match self {
            Step::Gap => Some(1),
            Step::Cause => Some(2),
            Step::AgentCause => Some(3),
            Step::Params => Some(4),
            Step::Apply | Step::Done => None,
        }
    }

    pub fn tag(self) -> String {
        format!("step:{}", self.number().unwrap_or(0))
    }
}

/// Results of the current iteration, filled step by step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepResults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<CauseReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_cause: Option<AgentCauseReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<StrategyPlan>,
}

impl StepResults {
    /// Forgets the result of `step` and of every later step.
    pub fn truncate(&mut self, step: Step) {
        if step <= Step::Gap {
            self.gap = None;
        }
        if step <= Step::Cause {
            self.cause = None;
            self.selection = None;
        }
        if step <= Step::AgentCause {
            self.agent_cause = None;
            if self.cause.as_ref().map(|c| c.reason_type) == Some(CauseType::PoorPerformance) {
                self.selection = None;
            }
        }
        if step <= Step::Params {
            self.plan = None;
        }
    }
}

/// What a step computes from.
pub struct StepInputs<'a> {
    pub lan: &'a Lan,
    pub example: &'a TrainingExample,
    pub trace: &'a RunTrace,
    pub results: &'a StepResults,
}

#[derive(Debug, thiserror::Error)]
pub enum StepError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Format(FormatError),
    #[error("unknown reason_type `{value}`")]
    UnknownReasonType { value: String },
    #[error("step result rejected: {0}")]
    Rejected(String),
    #[error(transparent)]
    Plan(#[from] PlanValidationError),
    #[error("selected agent `{choice}` is not one of {options:?}")]
    InvalidSelection { choice: String, options: Vec<String> },
    #[error("the {0:?} step has no model-computed result")]
    NotComputable(Step),
}

impl From<RepairError> for StepError {
    fn from(e: RepairError) -> Self {
        match e {
            RepairError::Gateway(g) => StepError::Gateway(g),
            RepairError::Format(f) => {
                let bad_label = f
                    .attempts
                    .last()
                    .and_then(|a| ResponseSchema::new().parse(a).ok())
                    .and_then(|m| m.get("reason_type").and_then(Value::as_str).map(String::from));
                match bad_label {
                    Some(value) if f.problem.contains("reason_type") => {
                        StepError::UnknownReasonType { value }
                    }
                    _ => StepError::Format(f),
                }
            }
        }
    }
}

/// A typed step result.
#[derive(Debug, Clone, PartialEq)]
pub enum StepValue {
    Gap(GapReport),
    Cause(CauseReport),
    AgentCause(AgentCauseReport),
    Plan(StrategyPlan),
}

impl StepValue {
    pub fn document(&self) -> Value {
        match self {
            StepValue::Gap(g) => serde_json::to_value(g),
            StepValue::Cause(c) => serde_json::to_value(c),
            StepValue::AgentCause(c) => serde_json::to_value(c),
            StepValue::Plan(p) => Ok(serde_json::json!({"parameters": p.parameters()})),
        }
        .expect("step result serializes")
    }
}

const GAP_TASK: &str = "Find the gap between the LAN's output and the ground truth. \
Compare the output of the LAN with the expected ground truth, identify the most significant \
deficiency of the LAN and isolate the crucial sub-task that was handled inadequately.";

const CAUSE_TASK: &str = "Find why the gap exists. The reason falls into exactly one of three categories:\n\
- missing_agent: no agent is responsible for the sub-task.\n\
- wrongly_activated: the sub-task should not have been executed, but the agent responsible for it was activated.\n\
- poor_performance: an agent already handles the sub-task, but its performance is poor.";

const AGENT_CAUSE_TASK: &str = "Why the agent has a poor performance. The reason falls into exactly one of four categories:\n\
- not_activated: the agent was not activated although it should have been.\n\
- lacks_knowledge: the agent lacks knowledge needed to produce a satisfactory output.\n\
- needs_split: the agent's subtask needs multiple steps or differs by condition, so the agent should be split into several agents.\n\
- needs_inputs: the agent needs additional inputs from other agents already in the LAN.";

const PARAMS_TASK: &str = "Calculate the parameter for the strategy. \
The LAN will be updated with this strategy and executed again on the training example.";

fn example_section(ex: &TrainingExample, trace: &RunTrace, out: &mut String) {
    out.push_str("\n# Training example\n");
    let _ = writeln!(out, "Input: {}", ex.input);
    let _ = writeln!(out, "Ground truth: {}", ex.ground_truth);
    let _ = writeln!(out, "LAN output: {}", trace.final_output);
}

fn answer_format(schema: &ResponseSchema, notes: &str, out: &mut String) {
    out.push_str("\n# Answer format\nReply with only a JSON object in this form:\n");
    out.push_str(&schema.render());
    out.push('\n');
    if !notes.is_empty() {
        out.push_str(notes);
    }
}

pub fn gap_schema() -> ResponseSchema {
    ResponseSchema::new()
        .field("gap", FieldKind::Text, "\"<the most significant deficiency of the LAN's output>\"")
        .optional("sub_task", FieldKind::Text, "\"<the crucial sub-task that was handled inadequately>\"")
}

pub fn cause_schema() -> ResponseSchema {
    ResponseSchema::new()
        .field(
            "reason_type",
            FieldKind::OneOf(CauseType::LABELS),
            "\"<missing_agent, wrongly_activated or poor_performance>\"",
        )
        .optional("agent_name", FieldKind::Text, "\"<name of the responsible agent, omitted for missing_agent>\"")
        .field("reason_content", FieldKind::Text, "\"<explanation of the reason>\"")
}

pub fn agent_cause_schema() -> ResponseSchema {
    ResponseSchema::new()
        .field(
            "reason_type",
            FieldKind::OneOf(AgentCauseType::LABELS),
            "\"<not_activated, lacks_knowledge, needs_split or needs_inputs>\"",
        )
        .field("reason_content", FieldKind::Text, "\"<explanation of the reason>\"")
}

const SPEC_TEMPLATE: &str = r#"{
      "name": "<agent name without spaces>",
      "subtask_description": "<what the agent does>",
      "output_description": "<what the agent outputs>",
      "cm_enabled": <false if the agent must run on every input, otherwise true>,
      "cm_knowledge": ["<knowledge for deciding whether the agent runs>"],
      "em_knowledge": ["<knowledge for computing the output>"]
    }"#;

fn params_placeholder(selection: &Selection) -> String {
    let target = selection.target.as_deref().unwrap_or("<agent name>");
    match selection.strategy {
        Strategy::AddAgent => format!(
            "{{\n    \"agent\": {SPEC_TEMPLATE},\n    \"predecessors\": [\"<agents whose outputs the new agent needs>\"],\n    \"successors\": [\"<agents that need the new agent's output>\"]\n  }}"
        ),
        Strategy::SplitAgent => format!(
            "{{\n    \"agent_name\": \"{target}\",\n    \"mode\": \"<sequential or parallel>\",\n    \"agents\": [{SPEC_TEMPLATE}],\n    \"edges\": [[\"<source>\", \"<target>\"]]\n  }}"
        ),
        Strategy::AddCmKnowledge | Strategy::AddEmKnowledge => format!(
            "{{\n    \"agent_name\": \"{target}\",\n    \"knowledge\": \"<one knowledge statement>\"\n  }}"
        ),
        Strategy::AddInputs => format!(
            "{{\n    \"agent_name\": \"{target}\",\n    \"sources\": [\"<agents whose outputs should be added as inputs>\"]\n  }}"
        ),
    }
}

pub fn params_schema(selection: &Selection) -> ResponseSchema {
    ResponseSchema::new().field("parameters", FieldKind::Object, params_placeholder(selection))
}

fn strategy_explanation(selection: &Selection) -> String {
    match (selection.strategy, selection.activate) {
        (Strategy::AddAgent, _) => "Add an agent: create a new agent responsible for the sub-task and place it in the LAN by naming its predecessors and successors.".into(),
        (Strategy::SplitAgent, _) => "Split an agent: replace the agent by two or more agents. \
In a sequential split the new agents form a chain of finer-grained steps; in a parallel split each new agent handles the inputs of one condition. \
Redistribute the agent's knowledge among the new agents.".into(),
        (Strategy::AddCmKnowledge, Some(false)) => "Add knowledge to the control module: write a statement that stops the agent from being activated on inputs like this one.".into(),
        (Strategy::AddCmKnowledge, _) => "Add knowledge to the control module: write a statement that makes the agent activate on inputs like this one.".into(),
        (Strategy::AddEmKnowledge, _) => "Add knowledge to the execution module: summarize the knowledge the agent needs to produce a satisfactory output.".into(),
        (Strategy::AddInputs, _) => "Add inputs to an agent: name the agents already in the LAN whose outputs this agent should also receive.".into(),
    }
}

fn split_notes() -> &'static str {
    "For a sequential split, agents are listed in execution order; edges default to a chain. \
For a parallel split, leave edges empty.\n"
}

/// Prompt for one of the four model-driven steps.
pub fn step_prompt(step: Step, inputs: &StepInputs) -> Result<String, StepError> {
    let mut out = String::new();
    let r = inputs.results;
    match step {
        Step::Gap => {
            let _ = writeln!(out, "# Task for this step\n{GAP_TASK}");
            example_section(inputs.example, inputs.trace, &mut out);
            out.push('\n');
            out.push_str(&render_lan_description(inputs.lan, inputs.trace));
            answer_format(&gap_schema(), "", &mut out);
        }
        Step::Cause => {
            let gap = r.gap.as_ref().ok_or(StepError::NotComputable(step))?;
            let _ = writeln!(out, "# Task for this step\n{CAUSE_TASK}");
            let _ = writeln!(out, "\n# The gap\n{}", gap.gap);
            if let Some(s) = &gap.sub_task {
                let _ = writeln!(out, "Sub-task: {s}");
            }
            example_section(inputs.example, inputs.trace, &mut out);
            out.push('\n');
            out.push_str(&render_lan_description(inputs.lan, inputs.trace));
            answer_format(&cause_schema(), "", &mut out);
        }
        Step::AgentCause => {
            let cause = r.cause.as_ref().ok_or(StepError::NotComputable(step))?;
            let name = cause.agent_name.as_deref().ok_or(StepError::NotComputable(step))?;
            let agent = inputs
                .lan
                .agent(name)
                .ok_or_else(|| StepError::Rejected(format!("no agent named `{name}`")))?;
            let _ = writeln!(out, "# Task for this step\n{AGENT_CAUSE_TASK}");
            let _ = writeln!(out, "\n# The poor performance\nAgent: {name}\n{}", cause.reason_content);
            if let Some(g) = &r.gap {
                let _ = writeln!(out, "Gap: {}", g.gap);
            }
            example_section(inputs.example, inputs.trace, &mut out);
            out.push('\n');
            out.push_str(&render_agent_description(agent, inputs.trace));
            answer_format(&agent_cause_schema(), "", &mut out);
        }
        Step::Params => {
            let selection = r.selection.as_ref().ok_or(StepError::NotComputable(step))?;
            let _ = writeln!(out, "# Task for this step\n{PARAMS_TASK}");
            let _ = writeln!(out, "\n# Selected strategy\n{}", strategy_explanation(selection));
            if let Some(g) = &r.gap {
                let _ = writeln!(out, "Gap: {}", g.gap);
            }
            if let Some(c) = &r.cause {
                let _ = writeln!(out, "Reason: {}", c.reason_content);
            }
            if let Some(c) = &r.agent_cause {
                let _ = writeln!(out, "Agent-level reason: {}", c.reason_content);
            }
            if let Some(target) = &selection.target {
                let agent = inputs
                    .lan
                    .agent(target)
                    .ok_or_else(|| StepError::Rejected(format!("no agent named `{target}`")))?;
                out.push_str("\n# The agent to be updated\n");
                out.push_str(&render_agent_description(agent, inputs.trace));
            }
            example_section(inputs.example, inputs.trace, &mut out);
            out.push('\n');
            out.push_str(&render_lan_description(inputs.lan, inputs.trace));
            let notes = if selection.strategy == Strategy::SplitAgent {
                split_notes()
            } else {
                ""
            };
            answer_format(&params_schema(selection), notes, &mut out);
        }
        Step::Apply | Step::Done => return Err(StepError::NotComputable(step)),
    }
    Ok(out)
}

pub fn step_schema(step: Step, results: &StepResults) -> Result<ResponseSchema, StepError> {
    Ok(match step {
        Step::Gap => gap_schema(),
        Step::Cause => cause_schema(),
        Step::AgentCause => agent_cause_schema(),
        Step::Params => params_schema(results.selection.as_ref().ok_or(StepError::NotComputable(step))?),
        Step::Apply | Step::Done => return Err(StepError::NotComputable(step)),
    })
}

/// Converts a step document into a validated typed result.
pub fn interpret(step: Step, doc: &Map<String, Value>, inputs: &StepInputs) -> Result<StepValue, StepError> {
    let value = Value::Object(doc.clone());
    match step {
        Step::Gap => {
            let g: GapReport =
                serde_json::from_value(value).map_err(|e| StepError::Rejected(e.to_string()))?;
            if g.gap.trim().is_empty() {
                return Err(StepError::Rejected("the gap is empty".into()));
            }
            Ok(StepValue::Gap(g))
        }
        Step::Cause => {
            if let Some(v) = doc.get("reason_type").and_then(Value::as_str) {
                if CauseType::parse_label(v).is_none() {
                    return Err(StepError::UnknownReasonType { value: v.into() });
                }
            }
            let mut value = value;
            if value.get("agent_name").is_some_and(Value::is_null) {
                value.as_object_mut().expect("object").remove("agent_name");
            }
            let c: CauseReport =
                serde_json::from_value(value).map_err(|e| StepError::Rejected(e.to_string()))?;
            let c = c.normalized().map_err(StepError::Rejected)?;
            if let Some(n) = &c.agent_name {
                if inputs.lan.agent(n).is_none() {
                    return Err(StepError::Rejected(format!("no agent named `{n}`")));
                }
            }
            Ok(StepValue::Cause(c))
        }
        Step::AgentCause => {
            if let Some(v) = doc.get("reason_type").and_then(Value::as_str) {
                if AgentCauseType::parse_label(v).is_none() {
                    return Err(StepError::UnknownReasonType { value: v.into() });
                }
            }
            let c: AgentCauseReport =
                serde_json::from_value(value).map_err(|e| StepError::Rejected(e.to_string()))?;
            Ok(StepValue::AgentCause(c))
        }
        Step::Params => {
            let selection = inputs
                .results
                .selection
                .as_ref()
                .ok_or(StepError::NotComputable(step))?;
            let mut params = doc
                .get("parameters")
                .cloned()
                .ok_or_else(|| StepError::Rejected("missing `parameters`".into()))?;
            if let (Some(obj), Some(target)) = (params.as_object_mut(), &selection.target) {
                obj.entry("agent_name").or_insert_with(|| Value::String(target.clone()));
            }
            let plan = StrategyPlan::from_parameters(selection.strategy, params).map_err(StepError::Rejected)?;
            validate_plan(inputs.lan, &plan)?;
            Ok(StepValue::Plan(plan))
        }
        Step::Apply | Step::Done => Err(StepError::NotComputable(step)),
    }
}

/// Sends `prompt` and parses the answer against `schema`, with format repair.
pub fn ask_document(
    gateway: &Gateway,
    prompt: &str,
    tag: &str,
    schema: &ResponseSchema,
    budget: u32,
) -> Result<(Map<String, Value>, Vec<CallRecord>), StepError> {
    let request = CompletionRequest::new(prompt, tag).with_temperature(DETERMINISTIC_TEMPERATURE);
    let response = gateway.complete(&request)?;
    let mut calls = vec![CallRecord::new(&request, &response.text)];
    let parsed = parse_or_reformat(&response.text, schema, gateway, budget, tag)?;
    calls.extend(parsed.repair_calls);
    Ok((parsed.value, calls))
}

/// A computed step: the document shown for review, its typed form and the calls made.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub document: Value,
    pub value: StepValue,
    pub calls: Vec<CallRecord>,
}

/// Computes `step` from scratch, optionally with user guidance appended to the prompt.
pub fn compute_step(
    step: Step,
    inputs: &StepInputs,
    gateway: &Gateway,
    budget: u32,
    hint: Option<&str>,
) -> Result<StepOutput, (StepError, Option<Value>)> {
    let prompt = step_prompt(step, inputs).map_err(|e| (e, None))?;
    let prompt = with_hint(prompt, hint);
    let schema = step_schema(step, inputs.results).map_err(|e| (e, None))?;
    let (doc, calls) = ask_document(gateway, &prompt, &step.tag(), &schema, budget).map_err(|e| (e, None))?;
    match interpret(step, &doc, inputs) {
        Ok(value) => Ok(StepOutput {
            document: value.document(),
            value,
            calls,
        }),
        Err(e) => Err((e, Some(Value::Object(doc)))),
    }
}

/// Appends a user guidance section to a step prompt.
pub fn with_hint(prompt: String, hint: Option<&str>) -> String {
    match hint.map(str::trim).filter(|h| !h.is_empty()) {
        None => prompt,
        Some(h) => format!("{prompt}\n# Guidance from the user\n{h}\n"),
    }
}

fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Equal up to whitespace; the judge's fast path.
pub fn exact_match(output: &str, ground_truth: &str) -> bool {
    normalize_whitespace(output) == normalize_whitespace(ground_truth)
}

pub fn judge_prompt(trace: &RunTrace, example: &TrainingExample) -> String {
    let schema = judge_schema();
    let mut out = String::from(
        "# Task\nDecide whether the output satisfies the expected ground truth. \
Minor wording differences are acceptable when the meaning and every requirement expressed by the ground truth are preserved.\n",
    );
    let _ = writeln!(out, "\n# Input\n{}", example.input);
    let _ = writeln!(out, "\n# Ground truth\n{}", example.ground_truth);
    let _ = writeln!(out, "\n# Output\n{}", trace.final_output);
    out.push_str("\nLet's think step by step.\n");
    answer_format(&schema, "", &mut out);
    out
}

fn judge_schema() -> ResponseSchema {
    ResponseSchema::new()
        .field("thought", FieldKind::Text, "\"<your reasoning>\"")
        .field("result", FieldKind::Bool, "<true if the output is satisfactory, otherwise false>")
}

/// Exact match after whitespace normalization, otherwise a model judgment.
pub fn check_satisfaction(
    trace: &RunTrace,
    example: &TrainingExample,
    gateway: &Gateway,
    budget: u32,
) -> Result<(bool, Vec<CallRecord>), StepError> {
    if exact_match(&trace.final_output, &example.ground_truth) {
        return Ok((true, Vec::new()));
    }
    let (doc, calls) = ask_document(gateway, &judge_prompt(trace, example), "judge", &judge_schema(), budget)?;
    Ok((doc["result"].as_bool().expect("schema checked"), calls))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ScriptedBackend;
    use crate::model::{Agent, NamedValues};
    use crate::runtime::AgentRunRecord;
    use std::sync::Arc;

    fn fixture() -> (Lan, TrainingExample, RunTrace) {
        let lan = Lan::new("Translate French poetry", "French text", "English text")
            .with_agent(Agent::new("Translator", "Translate", "English text").always_active());
        let ex = TrainingExample::new("ex1", "bonjour", "hello");
        let mut output = NamedValues::external("bonjour");
        output.insert("Translator", "good day");
        let trace = RunTrace {
            lan_snapshot: lan.clone(),
            external_input: "bonjour".into(),
            records: vec![AgentRunRecord {
                agent: "Translator".into(),
                inputs: NamedValues::external("bonjour"),
                cm_prompt: None,
                cm_thought: None,
                activated: true,
                em_prompt: Some("p".into()),
                em_thought: Some("t".into()),
                output,
                calls: vec![],
            }],
            final_output: "good day".into(),
        };
        (lan, ex, trace)
    }

    fn gw(script: &[&str]) -> Gateway {
        Gateway::new(Arc::new(ScriptedBackend::new(script.iter().copied())))
    }

    #[test]
    fn exact_match_skips_the_judge() {
        let (_, ex, mut trace) = fixture();
        trace.final_output = "  hello ".into();
        let g = gw(&[]);
        assert_eq!(check_satisfaction(&trace, &ex, &g, 3).unwrap(), (true, vec![]));
        assert_eq!(g.call_count(), 0);
    }

    #[test]
    fn judge_decides_otherwise() {
        let (_, ex, trace) = fixture();
        let g = gw(&[r#"{"thought":"no","result":false}"#, r#"{"thought":"same","result":true}"#]);
        assert!(!check_satisfaction(&trace, &ex, &g, 3).unwrap().0);
        assert!(check_satisfaction(&trace, &ex, &g, 3).unwrap().0);
    }

    #[test]
    fn empty_gap_is_rejected() {
        let (lan, ex, trace) = fixture();
        let results = StepResults::default();
        let inputs = StepInputs { lan: &lan, example: &ex, trace: &trace, results: &results };
        let g = gw(&[r#"{"gap":"  "}"#]);
        let err = compute_step(Step::Gap, &inputs, &g, 3, None).unwrap_err();
        assert!(matches!(err.0, StepError::Rejected(_)));
    }

    #[test]
    fn unknown_reason_type_after_repairs() {
        let (lan, ex, trace) = fixture();
        let results = StepResults {
            gap: Some(GapReport { gap: "no rhyme".into(), sub_task: None }),
            ..Default::default()
        };
        let inputs = StepInputs { lan: &lan, example: &ex, trace: &trace, results: &results };
        let bad = r#"{"reason_type":"cosmic rays","reason_content":"x"}"#;
        let g = gw(&[bad, bad, bad]);
        let err = compute_step(Step::Cause, &inputs, &g, 3, None).unwrap_err();
        assert!(matches!(err.0, StepError::UnknownReasonType { ref value } if value == "cosmic rays"));
        assert_eq!(g.call_count(), 3);
    }

    #[test]
    fn hint_appends_a_section() {
        let (lan, ex, trace) = fixture();
        let results = StepResults::default();
        let inputs = StepInputs { lan: &lan, example: &ex, trace: &trace, results: &results };
        let base = step_prompt(Step::Gap, &inputs).unwrap();
        let hinted = with_hint(base.clone(), Some("look at rhymes"));
        assert_eq!(hinted, format!("{base}\n# Guidance from the user\nlook at rhymes\n"));
        assert_eq!(with_hint(base.clone(), Some("  ")), base);
    }

    #[test]
    fn truncate_keeps_prefix() {
        let mut r = StepResults {
            gap: Some(GapReport { gap: "g".into(), sub_task: None }),
            cause: Some(CauseReport {
                reason_type: CauseType::MissingAgent,
                agent_name: None,
                reason_content: "c".into(),
            }),
            ..Default::default()
        };
        r.truncate(Step::Cause);
        assert!(r.gap.is_some() && r.cause.is_none());
    }
}
