//! A three-agent network with two satisfied examples in its history, and a
//! harness that applies a strategy and replays that history under a model
//! that knows nothing beyond its few-shot examples.

use std::sync::Arc;

use lanforge_core::gateway::{CompletionRequest, FnBackend, Gateway, GatewayError};
use lanforge_core::model::{validate_lan, Agent, Edge, Lan};
use lanforge_core::runtime::{Executor, RunConfig, RunTrace};
use lanforge_core::testing::{answer, prompt_inputs, ExampleOracle};
use lanforge_core::update::{
    apply_strategy, pinned_replay, record_success, refresh_history, Clock, FixedClock, HistoryEntry,
    Strategy, StrategyPlan, TrainingExample,
};
use serde_json::{json, Value};

pub fn base_lan() -> Lan {
    let mut lan = Lan::new("t", "i", "o")
        .with_agent(Agent::new("Reader", "read", "notes").always_active())
        .with_agent(Agent::new("Writer", "write", "prose"))
        .with_agent(Agent::new("Critic", "critique", "review").always_active());
    lan.edges = vec![Edge::new("Reader", "Writer"), Edge::new("Reader", "Critic")];
    lan
}

/// The world the history was produced in.
pub fn truth(req: &CompletionRequest) -> Result<String, GatewayError> {
    let tag = req.tag.as_str();
    if let Some(agent) = tag.strip_prefix("em:") {
        let inputs = prompt_inputs(&req.prompt).unwrap();
        let joined: Vec<String> = inputs.iter().map(|e| e.value.clone()).collect();
        return Ok(answer("t", format!("{agent}[{}]", joined.join("|"))));
    }
    if tag.starts_with("cm:") {
        let inputs = prompt_inputs(&req.prompt).unwrap();
        let x = inputs.get("__input__").unwrap_or_default();
        return Ok(answer("t", x.contains('w')));
    }
    if tag.starts_with("select:") {
        let first = req.prompt.split("\n# New agents\n- ").nth(1).unwrap().split(':').next().unwrap();
        return Ok(json!({"thought": "t", "agent_name": first}).to_string());
    }
    Err(GatewayError::Provider { status: 400, message: tag.into() })
}

/// A model that knows nothing beyond its few-shot examples.
pub fn forgetful() -> Gateway {
    Gateway::new(Arc::new(ExampleOracle::new(|req| {
        Ok(if req.tag.starts_with("cm:") { answer("guess", true) } else { answer("guess", "garbage") })
    })))
}

/// Two satisfied runs: one activates the gated Writer, one does not.
pub fn history() -> (Lan, Vec<HistoryEntry>) {
    let gw = Gateway::new(Arc::new(FnBackend::new("truth", truth)));
    let mut lan = base_lan();
    let mut history = Vec::new();
    for (id, x) in [("h1", "first w"), ("h2", "second")] {
        let trace = Executor::new(&gw).run_lan(&lan, x).unwrap();
        lan = record_success(&lan, &trace, id);
        history.push(HistoryEntry { example: TrainingExample::new(id, x, trace.final_output.clone()), trace });
    }
    assert!(history[0].trace.record("Writer").unwrap().activated);
    assert!(!history[1].trace.record("Writer").unwrap().activated);
    (lan, history)
}

fn same_behaviour(old: &RunTrace, new: &RunTrace, lan: &Lan) -> Result<(), String> {
    if new.final_output != old.final_output {
        return Err(format!("final output {:?} != {:?}", new.final_output, old.final_output));
    }
    for r in &old.records {
        if lan.agent(&r.agent).is_none() {
            continue;
        }
        let n = new.record(&r.agent).ok_or_else(|| format!("{} did not run", r.agent))?;
        if n.activated != r.activated {
            return Err(format!("activation of {} changed", r.agent));
        }
        if n.own_output() != r.own_output() {
            return Err(format!("output of {} changed", r.agent));
        }
    }
    Ok(())
}

pub struct Replayed {
    pub lan: Lan,
    pub history: Vec<HistoryEntry>,
    pub warnings: Vec<String>,
}

/// Applies one strategy and checks that every history entry replays to the
/// same activations and outputs.
pub fn apply(strategy: Strategy, params: Value) -> Result<Replayed, String> {
    let (lan, mut history) = history();
    let plan = StrategyPlan::from_parameters(strategy, params).map_err(|e| e.to_string())?;
    let gw = Gateway::new(Arc::new(FnBackend::new("truth", truth)));
    let applied = apply_strategy(&lan, &plan, &history, &gw, &RunConfig::default(), FixedClock::epoch().now())
        .map_err(|e| e.to_string())?;
    if !validate_lan(&applied.lan).is_empty() {
        return Err("updated network does not validate".into());
    }
    let mut warnings = applied.warnings.clone();
    let old: Vec<RunTrace> = history.iter().map(|h| h.trace.clone()).collect();
    warnings.extend(refresh_history(&applied.lan, &mut history));
    let model = forgetful();
    for (entry, old) in history.iter().zip(&old) {
        let rerun = Executor::new(&model).run_lan(&applied.lan, &entry.example.input).map_err(|e| e.to_string())?;
        same_behaviour(old, &rerun, &applied.lan).map_err(|e| format!("{}: {e}", entry.example.id))?;
        let pinned = pinned_replay(&applied.lan, &entry.example.id, &entry.example.input)
            .ok_or_else(|| format!("{}: no pinned replay", entry.example.id))?;
        if pinned.final_output != old.final_output {
            return Err(format!("{}: pinned replay differs", entry.example.id));
        }
    }
    Ok(Replayed { lan: applied.lan, history, warnings })
}

/// Parameters for every strategy shape the harness covers.
pub fn cases() -> Vec<(&'static str, Strategy, Value)> {
    vec![
        ("cm knowledge", Strategy::AddCmKnowledge, json!({"agent_name": "Writer", "knowledge": "Activate for w."})),
        ("em knowledge", Strategy::AddEmKnowledge, json!({"agent_name": "Reader", "knowledge": "Be brief."})),
        (
            "add agent",
            Strategy::AddAgent,
            json!({"agent": {"name": "Editor", "subtask_description": "edit", "output_description": "edited"}, "predecessors": ["Reader"]}),
        ),
        ("add inputs", Strategy::AddInputs, json!({"agent_name": "Critic", "sources": ["Writer"]})),
        (
            "sequential split",
            Strategy::SplitAgent,
            json!({"agent_name": "Reader", "mode": "sequential", "agents": [
                {"name": "Skimmer", "subtask_description": "skim", "output_description": "gist", "cm_enabled": false},
                {"name": "Annotator", "subtask_description": "annotate", "output_description": "notes", "cm_enabled": false}
            ]}),
        ),
        (
            "sequential split of a gated agent",
            Strategy::SplitAgent,
            json!({"agent_name": "Writer", "mode": "sequential", "agents": [
                {"name": "Drafter", "subtask_description": "draft", "output_description": "draft"},
                {"name": "Polisher", "subtask_description": "polish", "output_description": "prose"}
            ]}),
        ),
        (
            "parallel split",
            Strategy::SplitAgent,
            json!({"agent_name": "Writer", "mode": "parallel", "agents": [
                {"name": "PoetryWriter", "subtask_description": "verse", "output_description": "verse"},
                {"name": "ProseWriter", "subtask_description": "prose", "output_description": "prose"}
            ]}),
        ),
    ]
}
