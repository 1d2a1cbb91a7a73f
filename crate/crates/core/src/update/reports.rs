use std::fmt;

use serde::{Deserialize, Serialize};

use crate::runtime::normalize_label;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    pub gap: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_task: Option<String>,
}

/// Why the gap exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", try_from = "String")]
pub enum CauseType {
    MissingAgent,
    WronglyActivated,
    PoorPerformance,
}

impl CauseType {
    pub const ALL: [CauseType; 3] = [
        CauseType::MissingAgent,
        CauseType::WronglyActivated,
        CauseType::PoorPerformance,
    ];

    /// Every spelling accepted from the model or the console, normalized.
    pub const LABELS: &'static [&'static str] = &[
        "missing_agent",
        "lack_of_agents",
        "lack_of_agent",
        "wrongly_activated",
        "poor_performance",
    ];

    pub fn parse_label(raw: &str) -> Option<Self> {
        match normalize_label(raw).as_str() {
            "missing_agent" | "lack_of_agents" | "lack_of_agent" => Some(Self::MissingAgent),
            "wrongly_activated" => Some(Self::WronglyActivated),
            "poor_performance" => Some(Self::PoorPerformance),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MissingAgent => "missing_agent",
            Self::WronglyActivated => "wrongly_activated",
            Self::PoorPerformance => "poor_performance",
        }
    }
}

impl TryFrom<String> for CauseType {
    type Error = String;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::parse_label(&value).ok_or_else(|| format!("unknown reason_type `{value}`"))
    }
}

impl fmt::Display for CauseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauseReport {
    pub reason_type: CauseType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_name: Option<String>,
    pub reason_content: String,
}

impl CauseReport {
    /// Drops or demands `agent_name` according to the reason type.
    pub fn normalized(mut self) -> Result<Self, String> {
        match self.reason_type {
            CauseType::MissingAgent => {
                self.agent_name = None;
                Ok(self)
            }
            _ => match &self.agent_name {
                Some(n) if !n.trim().is_empty() => Ok(self),
                _ => Err(format!("reason_type {} requires agent_name", self.reason_type)),
            },
        }
    }
}

/// Why an existing agent performs poorly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", try_from = "String")]
pub enum AgentCauseType {
    NotActivated,
    LacksKnowledge,
    NeedsSplit,
    NeedsInputs,
}

impl AgentCauseType {
    pub const ALL: [AgentCauseType; 4] = [
        AgentCauseType::NotActivated,
        AgentCauseType::LacksKnowledge,
        AgentCauseType::NeedsSplit,
        AgentCauseType::NeedsInputs,
    ];

    pub const LABELS: &'static [&'static str] = &[
        "not_activated",
        "lacks_knowledge",
        "needs_split",
        "needs_inputs",
    ];

    pub fn parse_label(raw: &str) -> Option<Self> {
        match normalize_label(raw).as_str() {
            "not_activated" => Some(Self::NotActivated),
            "lacks_knowledge" => Some(Self::LacksKnowledge),
            "needs_split" => Some(Self::NeedsSplit),
            "needs_inputs" => Some(Self::NeedsInputs),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NotActivated => "not_activated",
            Self::LacksKnowledge => "lacks_knowledge",
            Self::NeedsSplit => "needs_split",
            Self::NeedsInputs => "needs_inputs",
        }
    }
}

impl TryFrom<String> for AgentCauseType {
    type Error = String;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::parse_label(&value).ok_or_else(|| format!("unknown reason_type `{value}`"))
    }
}

impl fmt::Display for AgentCauseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentCauseReport {
    pub reason_type: AgentCauseType,
    pub reason_content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    AddAgent,
    SplitAgent,
    AddCmKnowledge,
    AddEmKnowledge,
    AddInputs,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::AddAgent => "add_agent",
            Strategy::SplitAgent => "split_agent",
            Strategy::AddCmKnowledge => "add_cm_knowledge",
            Strategy::AddEmKnowledge => "add_em_knowledge",
            Strategy::AddInputs => "add_inputs",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Strategy chosen by the diagnosis steps, with its target and, for control
/// knowledge, which way the knowledge should push the gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activate: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextStep {
    AgentCause,
    Params(Selection),
}

/// Where the pipeline goes after the cause step.
pub fn route_cause(cause: &CauseReport) -> NextStep {
    match cause.reason_type {
        CauseType::MissingAgent => NextStep::Params(Selection {
            strategy: Strategy::AddAgent,
            target: None,
            activate: None,
        }),
        CauseType::WronglyActivated => NextStep::Params(Selection {
            strategy: Strategy::AddCmKnowledge,
            target: cause.agent_name.clone(),
            activate: Some(false),
        }),
        CauseType::PoorPerformance => NextStep::AgentCause,
    }
}

/// Strategy for a poorly performing agent.
pub fn route_agent_cause(agent: &str, cause: AgentCauseType) -> Selection {
    let (strategy, activate) = match cause {
        AgentCauseType::NotActivated => (Strategy::AddCmKnowledge, Some(true)),
        AgentCauseType::LacksKnowledge => (Strategy::AddEmKnowledge, None),
        AgentCauseType::NeedsSplit => (Strategy::SplitAgent, None),
        AgentCauseType::NeedsInputs => (Strategy::AddInputs, None),
    };
    Selection {
        strategy,
        target: Some(agent.to_string()),
        activate,
    }
}
