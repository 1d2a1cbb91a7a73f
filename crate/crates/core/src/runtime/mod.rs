//! Executes a network on one input.
//!
//! Agents run one at a time in topological order. Each agent receives the
//! external input plus everything its direct predecessors forward. Its control
//! module decides whether it runs; an activated agent appends its own result
//! to what it received, a deactivated one forwards its inputs unchanged.

pub mod prompt;
mod repair;
mod trace;

use std::collections::BTreeMap;

use serde_json::Value;

pub use repair::{
    normalize_label, parse_or_reformat, reformat_prompt, FieldKind, FieldSpec, FormatError, Parsed, RepairError,
    ResponseSchema,
};
pub use trace::{AgentRunRecord, CallRecord, RunTrace};

use crate::gateway::{
    CompletionRequest, Gateway, GatewayError, DETERMINISTIC_TEMPERATURE, GENERATION_TEMPERATURE,
};
use crate::model::{topological_order, validate_lan, Agent, Lan, NamedValues, Violation, EXTERNAL_INPUT};

pub const DEFAULT_REPAIR_BUDGET: u32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Total parse attempts per answer, counting the original output.
    pub repair_budget: u32,
    pub cm_temperature: f32,
    pub em_temperature: f32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            repair_budget: DEFAULT_REPAIR_BUDGET,
            cm_temperature: DETERMINISTIC_TEMPERATURE,
            em_temperature: GENERATION_TEMPERATURE,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error("network cannot run: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidLan(Vec<Violation>),
    #[error("agent {agent}: {source}")]
    Format {
        agent: String,
        #[source]
        source: FormatError,
    },
    #[error("agent {agent}: {source}")]
    Gateway {
        agent: String,
        #[source]
        source: GatewayError,
    },
    #[error("execution aborted after {} agents", .partial.records.len())]
    Aborted { partial: Box<RunTrace> },
}

/// Outcome of an activation gate.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub activated: bool,
    pub thought: Option<String>,
    /// Present when the model was asked.
    pub prompt: Option<String>,
    pub calls: Vec<CallRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub output: String,
    pub thought: String,
    pub prompt: String,
    pub calls: Vec<CallRecord>,
}

pub struct Executor<'g> {
    gateway: &'g Gateway,
    config: RunConfig,
}

impl<'g> Executor<'g> {
    pub fn new(gateway: &'g Gateway) -> Self {
        Self {
            gateway,
            config: RunConfig::default(),
        }
    }

    pub fn with_config(mut self, config: RunConfig) -> Self {
        self.config = config;
        self
    }

    pub fn gateway(&self) -> &Gateway {
        self.gateway
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn run_lan(&self, lan: &Lan, external_input: &str) -> Result<RunTrace, RuntimeError> {
        let violations = validate_lan(lan);
        if !violations.is_empty() {
            return Err(RuntimeError::InvalidLan(violations));
        }
        let order = topological_order(lan).map_err(|e| {
            RuntimeError::InvalidLan(vec![Violation::Cycle { agents: e.agents }])
        })?;
        let rank: BTreeMap<&str, usize> = order
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();

        let mut trace = RunTrace {
            lan_snapshot: lan.clone(),
            external_input: external_input.to_string(),
            records: Vec::with_capacity(order.len()),
            final_output: external_input.to_string(),
        };
        let mut outputs: BTreeMap<String, NamedValues> = BTreeMap::new();
        let mut activated: BTreeMap<String, bool> = BTreeMap::new();

        for name in &order {
            let agent = lan.agent(name).expect("ordered agent exists");
            let inputs = gather_inputs(lan, name, external_input, &outputs, &rank);

            let decision = match self.decide_activation(lan, agent, &inputs, &activated) {
                Ok(d) => d,
                Err(e) => return Err(self.fail(trace, name, e)),
            };
            let mut record = AgentRunRecord {
                agent: name.clone(),
                inputs: inputs.clone(),
                cm_prompt: decision.prompt,
                cm_thought: decision.thought,
                activated: decision.activated,
                em_prompt: None,
                em_thought: None,
                output: inputs.clone(),
                calls: decision.calls,
            };
            if decision.activated {
                match self.execute_agent(lan, agent, &inputs) {
                    Ok(exec) => {
                        record.em_prompt = Some(exec.prompt);
                        record.em_thought = Some(exec.thought);
                        record.calls.extend(exec.calls);
                        record.output.insert(name.clone(), exec.output);
                    }
                    Err(e) => {
                        trace.records.push(record);
                        return Err(self.fail(trace, name, e));
                    }
                }
            }
            activated.insert(name.clone(), record.activated);
            outputs.insert(name.clone(), record.output.clone());
            trace.records.push(record);
        }
        trace.final_output = final_output(&trace.records, external_input);
        Ok(trace)
    }

    fn fail(&self, mut partial: RunTrace, agent: &str, err: StepFailure) -> RuntimeError {
        partial.final_output = final_output(&partial.records, &partial.external_input);
        match err {
            StepFailure::Repair(RepairError::Gateway(GatewayError::Aborted)) => {
                RuntimeError::Aborted {
                    partial: Box::new(partial),
                }
            }
            StepFailure::Repair(RepairError::Gateway(source)) => RuntimeError::Gateway {
                agent: agent.to_string(),
                source,
            },
            StepFailure::Repair(RepairError::Format(source)) => RuntimeError::Format {
                agent: agent.to_string(),
                source,
            },
        }
    }

    /// Runs the activation gate of `agent`. The model is consulted only when
    /// the gate is enabled and every required predecessor was activated.
    pub fn decide_activation(
        &self,
        lan: &Lan,
        agent: &Agent,
        inputs: &NamedValues,
        predecessors_activated: &BTreeMap<String, bool>,
    ) -> Result<Decision, StepFailure> {
        if !agent.control.enabled {
            return Ok(Decision {
                activated: true,
                thought: None,
                prompt: None,
                calls: Vec::new(),
            });
        }
        let blocked = agent
            .control
            .required_predecessors
            .iter()
            .any(|p| !predecessors_activated.get(p).copied().unwrap_or(false));
        if blocked {
            return Ok(Decision {
                activated: false,
                thought: None,
                prompt: None,
                calls: Vec::new(),
            });
        }
        let prompt = prompt::build_cm_prompt(lan, agent, inputs);
        let tag = format!("cm:{}", agent.name);
        let (value, calls) = self.ask(&prompt, &tag, self.config.cm_temperature, &prompt::cm_schema())?;
        Ok(Decision {
            activated: value["result"].as_bool().expect("schema checked"),
            thought: value.get("thought").and_then(Value::as_str).map(str::to_string),
            prompt: Some(prompt),
            calls,
        })
    }

    pub fn execute_agent(
        &self,
        lan: &Lan,
        agent: &Agent,
        inputs: &NamedValues,
    ) -> Result<Execution, StepFailure> {
        let prompt = prompt::build_em_prompt(lan, agent, inputs);
        let tag = format!("em:{}", agent.name);
        let (value, calls) = self.ask(
            &prompt,
            &tag,
            self.config.em_temperature,
            &prompt::em_schema(agent),
        )?;
        Ok(Execution {
            output: value["result"].as_str().expect("schema checked").to_string(),
            thought: value
                .get("thought")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
            prompt,
            calls,
        })
    }

    fn ask(
        &self,
        prompt: &str,
        tag: &str,
        temperature: f32,
        schema: &ResponseSchema,
    ) -> Result<(serde_json::Map<String, Value>, Vec<CallRecord>), StepFailure> {
        let request = CompletionRequest::new(prompt, tag).with_temperature(temperature);
        let response = self
            .gateway
            .complete(&request)
            .map_err(|e| StepFailure::Repair(e.into()))?;
        let mut calls = vec![CallRecord::new(&request, &response.text)];
        let parsed = parse_or_reformat(
            &response.text,
            schema,
            self.gateway,
            self.config.repair_budget,
            tag,
        )
        .map_err(StepFailure::Repair)?;
        calls.extend(parsed.repair_calls);
        Ok((parsed.value, calls))
    }
}

/// Why a single gate or execution failed.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StepFailure {
    #[error(transparent)]
    Repair(RepairError),
}

/// External input plus every entry forwarded by direct predecessors, ordered
/// with the external input first and then by the producing agent's position
/// in the execution order.
pub fn gather_inputs(
    lan: &Lan,
    agent: &str,
    external_input: &str,
    outputs: &BTreeMap<String, NamedValues>,
    rank: &BTreeMap<&str, usize>,
) -> NamedValues {
    let mut collected: BTreeMap<(usize, String), String> = BTreeMap::new();
    collected.insert((0, EXTERNAL_INPUT.to_string()), external_input.to_string());
    for pred in lan.predecessors(agent) {
        let Some(forwarded) = outputs.get(pred) else {
            continue;
        };
        for e in forwarded.iter() {
            if e.source == EXTERNAL_INPUT {
                continue;
            }
            let key = (rank.get(e.source.as_str()).map_or(usize::MAX, |r| r + 1), e.source.clone());
            collected.entry(key).or_insert_with(|| e.value.clone());
        }
    }
    collected
        .into_iter()
        .map(|((_, source), value)| (source, value))
        .collect()
}

/// The last activated agent's own result, or the external input when no agent ran.
pub fn final_output(records: &[AgentRunRecord], external_input: &str) -> String {
    records
        .iter()
        .rev()
        .find_map(|r| r.own_output())
        .unwrap_or(external_input)
        .to_string()
}
