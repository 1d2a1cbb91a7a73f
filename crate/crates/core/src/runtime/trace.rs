use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::gateway::CompletionRequest;
use crate::model::{Lan, NamedValues};

/// One model call made while running an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub tag: String,
    pub prompt: String,
    pub response: String,
}

impl CallRecord {
    pub fn new(request: &CompletionRequest, response: &str) -> Self {
        Self {
            tag: request.tag.clone(),
            prompt: request.prompt.clone(),
            response: response.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRunRecord {
    pub agent: String,
    pub inputs: NamedValues,
    /// Present only when the activation gate asked the model.
    pub cm_prompt: Option<String>,
    pub cm_thought: Option<String>,
    pub activated: bool,
    pub em_prompt: Option<String>,
    pub em_thought: Option<String>,
    /// What the output module forwards downstream.
    pub output: NamedValues,
    /// Every model call for this agent, including format repairs.
    pub calls: Vec<CallRecord>,
}

impl AgentRunRecord {
    /// The agent's own result, when it was activated.
    pub fn own_output(&self) -> Option<&str> {
        if self.activated {
            self.output.get(&self.agent)
        } else {
            None
        }
    }

    pub fn cm_asked_model(&self) -> bool {
        self.cm_prompt.is_some()
    }
}

/// Complete record of one execution of a network on one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub lan_snapshot: Lan,
    pub external_input: String,
    /// In execution order.
    pub records: Vec<AgentRunRecord>,
    pub final_output: String,
}

impl RunTrace {
    pub fn record(&self, agent: &str) -> Option<&AgentRunRecord> {
        self.records.iter().find(|r| r.agent == agent)
    }

    pub fn activated(&self) -> BTreeSet<String> {
        self.records
            .iter()
            .filter(|r| r.activated)
            .map(|r| r.agent.clone())
            .collect()
    }

    pub fn llm_call_count(&self) -> usize {
        self.records.iter().map(|r| r.calls.len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}
