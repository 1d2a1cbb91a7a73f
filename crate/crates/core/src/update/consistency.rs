//! Applying strategies without breaking previously satisfied training inputs,
//! and recording successful runs as module examples.

use std::collections::BTreeMap;
use std::fmt::Write;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::describe::render_agent_description;
use super::plan::{apply_structure, SplitMode, SplitParams, StrategyPlan};
use super::steps::{ask_document, StepError};
use super::TrainingExample;
use crate::gateway::Gateway;
use crate::model::{
    topological_order, Agent, Example, ExampleResult, Lan, ModuleKind, NamedValues,
};
use crate::runtime::prompt::render_values;
use crate::runtime::{
    final_output, gather_inputs, AgentRunRecord, CallRecord, Executor, FieldKind, ResponseSchema,
    RunConfig, RunTrace, StepFailure,
};

/// A training example the network already handles, with the run that proved it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub example: TrainingExample,
    pub trace: RunTrace,
}

/// Result of applying a strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Applied {
    pub lan: Lan,
    pub warnings: Vec<String>,
    pub calls: Vec<CallRecord>,
}

fn rank_of(lan: &Lan) -> BTreeMap<String, usize> {
    topological_order(lan)
        .map(|o| o.into_iter().enumerate().map(|(i, n)| (n, i)).collect())
        .unwrap_or_default()
}

fn outputs_of(trace: &RunTrace) -> BTreeMap<String, NamedValues> {
    trace
        .records
        .iter()
        .map(|r| (r.agent.clone(), r.output.clone()))
        .collect()
}

fn inputs_for(
    lan: &Lan,
    agent: &str,
    external: &str,
    outputs: &BTreeMap<String, NamedValues>,
    rank: &BTreeMap<String, usize>,
) -> NamedValues {
    let rank: BTreeMap<&str, usize> = rank.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    gather_inputs(lan, agent, external, outputs, &rank)
}

fn push_example(agent: &mut Agent, kind: ModuleKind, inputs: NamedValues, result: ExampleResult, provenance: &str) {
    agent.examples_mut(kind).push(Example {
        inputs,
        result,
        provenance: provenance.to_string(),
    });
}

fn relabel_provenance(lan: &mut Lan, provenance: &str, from: &str, to: &str) {
    for a in &mut lan.agents {
        for kind in [ModuleKind::Control, ModuleKind::Execution] {
            for ex in a.examples_mut(kind).iter_mut().filter(|e| e.provenance == provenance) {
                ex.inputs.relabel(from, to);
            }
        }
    }
}

/// Applies `plan` to `lan` and adds the examples that keep every history
/// entry producing the same activations and final output.
pub fn apply_strategy(
    lan: &Lan,
    plan: &StrategyPlan,
    history: &[HistoryEntry],
    gateway: &Gateway,
    config: &RunConfig,
    now: DateTime<Utc>,
) -> Result<Applied, StepError> {
    let mut warnings = Vec::new();
    let mut calls = Vec::new();
    let lan = match plan {
        StrategyPlan::AddAgent(p) => {
            let mut out = apply_structure(lan, plan, now, !history.is_empty())?;
            let name = p.agent.name.trim().to_string();
            let rank = rank_of(&out);
            for entry in history {
                let preds = out.predecessors(&name);
                if let Some(missing) = preds.iter().find(|p| entry.trace.record(p).is_none()) {
                    warnings.push(format!(
                        "history `{}`: cannot reconstruct the inputs of `{name}` because `{missing}` did not run; no negative example added",
                        entry.example.id
                    ));
                    continue;
                }
                let inputs = inputs_for(&out, &name, &entry.trace.external_input, &outputs_of(&entry.trace), &rank);
                let agent = out.agent_mut(&name).expect("just added");
                push_example(agent, ModuleKind::Control, inputs, ExampleResult::Activation(false), &entry.example.id);
            }
            out
        }
        StrategyPlan::SplitAgent(p) => split_with_history(lan, p, plan, history, gateway, config, now, &mut warnings, &mut calls)?,
        StrategyPlan::AddCmKnowledge(_) | StrategyPlan::AddEmKnowledge(_) | StrategyPlan::AddInputs(_) => {
            apply_structure(lan, plan, now, false)?
        }
    };
    Ok(Applied { lan, warnings, calls })
}

#[allow(clippy::too_many_arguments)]
fn split_with_history(
    lan: &Lan,
    p: &SplitParams,
    plan: &StrategyPlan,
    history: &[HistoryEntry],
    gateway: &Gateway,
    config: &RunConfig,
    now: DateTime<Utc>,
    warnings: &mut Vec<String>,
    calls: &mut Vec<CallRecord>,
) -> Result<Lan, StepError> {
    let original_name = p.agent_name.as_str();
    let any_inactive = history
        .iter()
        .filter_map(|e| e.trace.record(original_name))
        .any(|r| !r.activated);
    let mut out = apply_structure(lan, plan, now, any_inactive)?;
    let names: Vec<String> = p.agents.iter().map(|a| a.name.trim().to_string()).collect();
    let last = names.last().expect("validated").clone();
    let rank = rank_of(&out);
    let original = lan.agent(original_name).expect("validated").clone();

    for entry in history {
        let id = entry.example.id.as_str();
        let Some(record) = entry.trace.record(original_name) else {
            warnings.push(format!(
                "history `{id}`: `{original_name}` did not run; no examples added for the new agents"
            ));
            continue;
        };
        if !record.activated {
            for n in &names {
                let agent = out.agent_mut(n).expect("new agent");
                push_example(agent, ModuleKind::Control, record.inputs.clone(), ExampleResult::Activation(false), id);
            }
            continue;
        }
        let original_output = record.own_output().unwrap_or_default().to_string();
        match p.mode {
            SplitMode::Parallel => {
                let (chosen, selection_calls) = select_agent(&original, record, &entry.trace, &out, &names, gateway, config.repair_budget)?;
                calls.extend(selection_calls);
                for n in &names {
                    let agent = out.agent_mut(n).expect("new agent");
                    push_example(agent, ModuleKind::Control, record.inputs.clone(), ExampleResult::Activation(n == &chosen), id);
                }
                let agent = out.agent_mut(&chosen).expect("new agent");
                push_example(agent, ModuleKind::Execution, record.inputs.clone(), ExampleResult::Output(original_output), id);
                relabel_provenance(&mut out, id, original_name, &chosen);
            }
            SplitMode::Sequential => {
                let mut outputs = outputs_of(&entry.trace);
                outputs.remove(original_name);
                let order: Vec<String> = topological_order(&out)
                    .expect("validated")
                    .into_iter()
                    .filter(|n| names.contains(n))
                    .collect();
                let mut added: Vec<(String, NamedValues, String)> = Vec::new();
                for n in &order {
                    let inputs = inputs_for(&out, n, &entry.trace.external_input, &outputs, &rank);
                    let output = if n == &last {
                        original_output.clone()
                    } else {
                        let exec = Executor::new(gateway).with_config(config.clone());
                        let agent = out.agent(n).expect("new agent");
                        match exec.execute_agent(&out, agent, &inputs) {
                            Ok(e) => {
                                calls.extend(e.calls);
                                e.output
                            }
                            Err(StepFailure::Repair(r)) => return Err(r.into()),
                        }
                    };
                    let mut forwarded = inputs.clone();
                    forwarded.insert(n.clone(), output.clone());
                    outputs.insert(n.clone(), forwarded);
                    added.push((n.clone(), inputs, output));
                }
                for (n, inputs, output) in added {
                    let agent = out.agent_mut(&n).expect("new agent");
                    if agent.control.enabled {
                        push_example(agent, ModuleKind::Control, inputs.clone(), ExampleResult::Activation(true), id);
                    }
                    push_example(agent, ModuleKind::Execution, inputs, ExampleResult::Output(output), id);
                }
                relabel_provenance(&mut out, id, original_name, &last);
            }
        }
    }
    Ok(out)
}

fn select_agent(
    original: &Agent,
    record: &AgentRunRecord,
    trace: &RunTrace,
    lan: &Lan,
    names: &[String],
    gateway: &Gateway,
    budget: u32,
) -> Result<(String, Vec<CallRecord>), StepError> {
    let mut prompt = format!(
        "# Task\nThe agent \"{}\" has been split into agents that each handle inputs of a different kind. \
Select the one new agent that should handle the input below and produce the original agent's output.\n\n",
        original.name
    );
    prompt.push_str(&render_agent_description(original, trace));
    prompt.push_str("\n# New agents\n");
    for n in names {
        let subtask = lan.agent(n).map(|a| a.execution.subtask_description.as_str()).unwrap_or("");
        let _ = writeln!(prompt, "- {n}: {subtask}");
    }
    prompt.push_str("\n# Input\n");
    prompt.push_str(&render_values(&record.inputs));
    let _ = writeln!(prompt, "\n# Original output\n{}", record.own_output().unwrap_or_default());
    let schema = ResponseSchema::new()
        .field("thought", FieldKind::Text, "\"<your reasoning>\"")
        .field("agent_name", FieldKind::Text, format!("\"<one of: {}>\"", names.join(", ")));
    prompt.push_str("\nLet's think step by step.\n\n# Answer format\nReply with only a JSON object in this form:\n");
    prompt.push_str(&schema.render());
    prompt.push('\n');
    let (doc, calls) = ask_document(gateway, &prompt, &format!("select:{}", original.name), &schema, budget)?;
    let choice = doc["agent_name"].as_str().unwrap_or_default().trim().to_string();
    if !names.contains(&choice) {
        return Err(StepError::InvalidSelection {
            choice,
            options: names.to_vec(),
        });
    }
    Ok((choice, calls))
}

/// Stores each agent's decision and output from a satisfied run as module
/// examples. Re-recording the same example replaces its earlier records.
pub fn record_success(lan: &Lan, trace: &RunTrace, example_id: &str) -> Lan {
    let mut out = lan.clone();
    for r in &trace.records {
        let Some(agent) = out.agent_mut(&r.agent) else {
            continue;
        };
        if r.cm_asked_model() {
            agent.control.examples.retain(|e| e.provenance != example_id);
            push_example(agent, ModuleKind::Control, r.inputs.clone(), ExampleResult::Activation(r.activated), example_id);
        }
        if let Some(o) = r.own_output() {
            let o = o.to_string();
            agent.execution.examples.retain(|e| e.provenance != example_id);
            push_example(agent, ModuleKind::Execution, r.inputs.clone(), ExampleResult::Output(o), example_id);
        }
    }
    out
}

fn pinned<'a>(examples: &'a [Example], provenance: &str, inputs: &NamedValues) -> Option<&'a ExampleResult> {
    examples
        .iter()
        .filter(|e| e.provenance == provenance && e.inputs.is_subset_of(inputs))
        .fold(None::<&Example>, |best, e| match best {
            Some(b) if b.inputs.len() > e.inputs.len() => Some(b),
            _ => Some(e),
        })
        .map(|e| &e.result)
}

/// Re-executes a history input using only the examples recorded for it,
/// without calling a model. `None` when some decision or output is not pinned.
pub fn pinned_replay(lan: &Lan, provenance: &str, external_input: &str) -> Option<RunTrace> {
    let order = topological_order(lan).ok()?;
    let rank = rank_of(lan);
    let mut outputs = BTreeMap::new();
    let mut activated: BTreeMap<String, bool> = BTreeMap::new();
    let mut records = Vec::new();
    for name in &order {
        let agent = lan.agent(name)?;
        let inputs = inputs_for(lan, name, external_input, &outputs, &rank);
        let blocked = agent
            .control
            .required_predecessors
            .iter()
            .any(|p| !activated.get(p).copied().unwrap_or(false));
        let active = if !agent.control.enabled {
            true
        } else if blocked {
            false
        } else {
            match pinned(&agent.control.examples, provenance, &inputs)? {
                ExampleResult::Activation(b) => *b,
                ExampleResult::Output(_) => return None,
            }
        };
        let mut output = inputs.clone();
        if active {
            match pinned(&agent.execution.examples, provenance, &inputs)? {
                ExampleResult::Output(o) => output.insert(name.clone(), o.clone()),
                ExampleResult::Activation(_) => return None,
            }
        }
        activated.insert(name.clone(), active);
        outputs.insert(name.clone(), output.clone());
        records.push(AgentRunRecord {
            agent: name.clone(),
            inputs,
            cm_prompt: None,
            cm_thought: None,
            activated: active,
            em_prompt: None,
            em_thought: None,
            output,
            calls: Vec::new(),
        });
    }
    let final_output = final_output(&records, external_input);
    Some(RunTrace {
        lan_snapshot: lan.clone(),
        external_input: external_input.to_string(),
        records,
        final_output,
    })
}

/// Brings history traces in line with `lan` after a strategy. Entries whose
/// replay is not fully pinned, or no longer gives the recorded output, keep
/// their old trace and produce a warning.
pub fn refresh_history(lan: &Lan, history: &mut [HistoryEntry]) -> Vec<String> {
    let mut warnings = Vec::new();
    for entry in history.iter_mut() {
        match pinned_replay(lan, &entry.example.id, &entry.example.input) {
            Some(t) if t.final_output == entry.trace.final_output => entry.trace = t,
            Some(t) => warnings.push(format!(
                "history `{}` now replays to a different output: {}",
                entry.example.id,
                Value::String(t.final_output)
            )),
            None => warnings.push(format!(
                "history `{}` is not fully pinned by examples; keeping its previous trace",
                entry.example.id
            )),
        }
    }
    warnings
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InitError {
    #[error("the task description is empty")]
    EmptyTask,
}

/// Agent name derived from the task: its words in CamelCase.
pub fn agent_name_for_task(task: &str) -> String {
    let mut name = String::new();
    for word in task.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        let mut chars = word.chars();
        if let Some(first) = chars.next() {
            name.extend(first.to_uppercase());
            name.push_str(chars.as_str());
        }
        if name.chars().count() >= 48 {
            break;
        }
    }
    let name: String = name.chars().take(48).collect();
    if name.is_empty() {
        "Agent".into()
    } else {
        name
    }
}

/// The starting network: one always-active agent performing the whole task.
pub fn init_lan(task: &str, input: &str, output: &str) -> Result<Lan, InitError> {
    let task = task.trim();
    if task.is_empty() {
        return Err(InitError::EmptyTask);
    }
    let output = output.trim();
    let agent_output = if output.is_empty() {
        "The result of the task."
    } else {
        output
    };
    let agent = Agent::new(agent_name_for_task(task), task, agent_output).always_active();
    Ok(Lan::new(task, input.trim(), output).with_agent(agent))
}
