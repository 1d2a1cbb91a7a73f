//! Strategy parameters and their structural application to a network.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::reports::Strategy;
use crate::model::{
    structural_issues, validate_lan, Agent, Edge, KnowledgeItem, KnowledgeOrigin, Lan, ModuleKind,
    StructureIssue, Violation, EXTERNAL_INPUT,
};

fn yes() -> bool {
    true
}

/// Description of an agent the pipeline wants to create.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    pub subtask_description: String,
    pub output_description: String,
    #[serde(default = "yes")]
    pub cm_enabled: bool,
    #[serde(default)]
    pub required_predecessors: Vec<String>,
    #[serde(default)]
    pub cm_knowledge: Vec<String>,
    #[serde(default)]
    pub em_knowledge: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddAgentParams {
    pub agent: AgentSpec,
    #[serde(default)]
    pub predecessors: Vec<String>,
    #[serde(default)]
    pub successors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    pub agent_name: String,
    pub mode: SplitMode,
    pub agents: Vec<AgentSpec>,
    /// Edges among the new agents. Defaults to a chain in spec order for
    /// sequential splits and to no edges for parallel ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<Edge>>,
}

impl SplitParams {
    pub fn internal_edges(&self) -> Vec<Edge> {
        match (&self.edges, self.mode) {
            (Some(e), _) => e.clone(),
            (None, SplitMode::Sequential) => self
                .agents
                .windows(2)
                .map(|w| Edge::new(w[0].name.clone(), w[1].name.clone()))
                .collect(),
            (None, SplitMode::Parallel) => Vec::new(),
        }
    }

    pub fn new_names(&self) -> Vec<String> {
        self.agents.iter().map(|a| a.name.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeParams {
    pub agent_name: String,
    pub knowledge: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddInputsParams {
    pub agent_name: String,
    pub sources: Vec<String>,
}

/// A strategy together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", content = "parameters", rename_all = "snake_case")]
pub enum StrategyPlan {
    AddAgent(AddAgentParams),
    SplitAgent(SplitParams),
    AddCmKnowledge(KnowledgeParams),
    AddEmKnowledge(KnowledgeParams),
    AddInputs(AddInputsParams),
}

impl StrategyPlan {
    pub fn strategy(&self) -> Strategy {
        match self {
            StrategyPlan::AddAgent(_) => Strategy::AddAgent,
            StrategyPlan::SplitAgent(_) => Strategy::SplitAgent,
            StrategyPlan::AddCmKnowledge(_) => Strategy::AddCmKnowledge,
            StrategyPlan::AddEmKnowledge(_) => Strategy::AddEmKnowledge,
            StrategyPlan::AddInputs(_) => Strategy::AddInputs,
        }
    }

    pub fn from_parameters(strategy: Strategy, parameters: Value) -> Result<Self, String> {
        let doc = serde_json::json!({"strategy": strategy.as_str(), "parameters": parameters});
        serde_json::from_value(doc).map_err(|e| format!("parameters do not fit {strategy}: {e}"))
    }

    pub fn parameters(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("plan serializes");
        v["parameters"].take()
    }

    /// The existing agent the plan modifies, if any.
    pub fn target(&self) -> Option<&str> {
        match self {
            StrategyPlan::AddAgent(_) => None,
            StrategyPlan::SplitAgent(p) => Some(&p.agent_name),
            StrategyPlan::AddCmKnowledge(p) | StrategyPlan::AddEmKnowledge(p) => Some(&p.agent_name),
            StrategyPlan::AddInputs(p) => Some(&p.agent_name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum PlanIssue {
    UnknownAgent { name: String },
    NameTaken { name: String },
    Invalid { message: String },
    Violation(Violation),
    Structure(StructureIssue),
}

impl fmt::Display for PlanIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanIssue::UnknownAgent { name } => write!(f, "no agent named `{name}`"),
            PlanIssue::NameTaken { name } => write!(f, "agent name `{name}` is already used"),
            PlanIssue::Invalid { message } => f.write_str(message),
            PlanIssue::Violation(v) => write!(f, "{v}"),
            PlanIssue::Structure(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
#[error("invalid plan: {}", .issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
pub struct PlanValidationError {
    pub issues: Vec<PlanIssue>,
}

impl PlanValidationError {
    pub fn has_cycle(&self) -> bool {
        self.issues
            .iter()
            .any(|i| matches!(i, PlanIssue::Violation(Violation::Cycle { .. })))
    }
}

/// Checks a plan against `lan` without modifying it.
pub fn validate_plan(lan: &Lan, plan: &StrategyPlan) -> Result<(), PlanValidationError> {
    apply_structure(lan, plan, DateTime::<Utc>::UNIX_EPOCH, false).map(|_| ())
}

fn pipeline_item(text: &str, now: DateTime<Utc>) -> KnowledgeItem {
    KnowledgeItem::new(text.trim(), KnowledgeOrigin::Pipeline, now)
}

fn check_spec(spec: &AgentSpec, issues: &mut Vec<PlanIssue>) {
    if spec.name.trim().is_empty() {
        issues.push(PlanIssue::Invalid {
            message: "new agent has an empty name".into(),
        });
    }
    if spec.name == EXTERNAL_INPUT {
        issues.push(PlanIssue::Structure(StructureIssue::ReservedName {
            name: spec.name.clone(),
        }));
    }
}

fn build_agent(spec: &AgentSpec, now: DateTime<Utc>) -> Agent {
    let mut a = Agent::new(
        spec.name.trim(),
        spec.subtask_description.trim(),
        spec.output_description.trim(),
    );
    a.control.enabled = spec.cm_enabled;
    a.control.required_predecessors = spec.required_predecessors.clone();
    for k in spec.cm_knowledge.iter().filter(|k| !k.trim().is_empty()) {
        a.control.knowledge.push(pipeline_item(k, now));
    }
    for k in spec.em_knowledge.iter().filter(|k| !k.trim().is_empty()) {
        a.execution.knowledge.push(pipeline_item(k, now));
    }
    a
}

/// Applies the structural part of a plan: agents, edges and knowledge.
/// `force_cm` turns on the activation gate of every newly created agent.
pub fn apply_structure(
    lan: &Lan,
    plan: &StrategyPlan,
    now: DateTime<Utc>,
    force_cm: bool,
) -> Result<Lan, PlanValidationError> {
    let mut issues = Vec::new();
    let mut out = lan.clone();
    let exists = |n: &str, issues: &mut Vec<PlanIssue>| {
        if lan.agent(n).is_none() {
            issues.push(PlanIssue::UnknownAgent { name: n.to_string() });
            false
        } else {
            true
        }
    };

    match plan {
        StrategyPlan::AddAgent(p) => {
            check_spec(&p.agent, &mut issues);
            let name = p.agent.name.trim().to_string();
            if lan.agent(&name).is_some() {
                issues.push(PlanIssue::NameTaken { name: name.clone() });
            }
            for n in p.predecessors.iter().chain(&p.successors) {
                exists(n, &mut issues);
            }
            for r in &p.agent.required_predecessors {
                if !p.predecessors.contains(r) {
                    issues.push(PlanIssue::Invalid {
                        message: format!("required predecessor `{r}` is not among the predecessors"),
                    });
                }
            }
            if issues.is_empty() {
                let mut agent = build_agent(&p.agent, now);
                if force_cm {
                    agent.control.enabled = true;
                }
                out.agents.push(agent);
                for s in &p.predecessors {
                    out.add_edge(s, &name);
                }
                for t in &p.successors {
                    out.add_edge(&name, t);
                }
            }
        }
        StrategyPlan::SplitAgent(p) => {
            if exists(&p.agent_name, &mut issues) {
                split(lan, p, now, force_cm, &mut out, &mut issues);
            }
        }
        StrategyPlan::AddCmKnowledge(p) | StrategyPlan::AddEmKnowledge(p) => {
            if p.knowledge.trim().is_empty() {
                issues.push(PlanIssue::Invalid {
                    message: "knowledge text is empty".into(),
                });
            }
            if exists(&p.agent_name, &mut issues) && issues.is_empty() {
                let kind = if matches!(plan, StrategyPlan::AddCmKnowledge(_)) {
                    ModuleKind::Control
                } else {
                    ModuleKind::Execution
                };
                out.agent_mut(&p.agent_name)
                    .expect("checked")
                    .knowledge_mut(kind)
                    .push(pipeline_item(&p.knowledge, now));
            }
        }
        StrategyPlan::AddInputs(p) => {
            exists(&p.agent_name, &mut issues);
            if p.sources.is_empty() {
                issues.push(PlanIssue::Invalid {
                    message: "no input sources given".into(),
                });
            }
            for s in &p.sources {
                if exists(s, &mut issues) && s == &p.agent_name {
                    issues.push(PlanIssue::Invalid {
                        message: format!("`{s}` cannot feed itself"),
                    });
                }
            }
            if issues.is_empty() {
                let added = p
                    .sources
                    .iter()
                    .filter(|s| out.add_edge(s, &p.agent_name))
                    .count();
                if added == 0 {
                    issues.push(PlanIssue::Invalid {
                        message: format!("every source already feeds `{}`", p.agent_name),
                    });
                }
            }
        }
    }

    if issues.is_empty() {
        issues.extend(validate_lan(&out).into_iter().map(PlanIssue::Violation));
        issues.extend(structural_issues(&out).into_iter().map(PlanIssue::Structure));
    }
    if issues.is_empty() {
        Ok(out)
    } else {
        Err(PlanValidationError { issues })
    }
}

fn split(
    lan: &Lan,
    p: &SplitParams,
    now: DateTime<Utc>,
    force_cm: bool,
    out: &mut Lan,
    issues: &mut Vec<PlanIssue>,
) {
    if p.agents.len() < 2 {
        issues.push(PlanIssue::Invalid {
            message: "a split needs at least two new agents".into(),
        });
        return;
    }
    let names: Vec<String> = p.agents.iter().map(|a| a.name.trim().to_string()).collect();
    let mut seen = BTreeSet::new();
    for (spec, name) in p.agents.iter().zip(&names) {
        check_spec(spec, issues);
        if !seen.insert(name.clone()) || (name != &p.agent_name && lan.agent(name).is_some()) {
            issues.push(PlanIssue::NameTaken { name: name.clone() });
        }
        if !spec.required_predecessors.is_empty() {
            issues.push(PlanIssue::Invalid {
                message: "required predecessors of split agents are inherited, not specified".into(),
            });
        }
    }
    let internal = p.internal_edges();
    for e in &internal {
        for n in [&e.source, &e.target] {
            if !names.contains(n) {
                issues.push(PlanIssue::Invalid {
                    message: format!("internal edge endpoint `{n}` is not a new agent"),
                });
            }
        }
    }
    match p.mode {
        SplitMode::Sequential => {
            let first = &names[0];
            let last = &names[names.len() - 1];
            if internal.iter().any(|e| &e.target == first) {
                issues.push(PlanIssue::Invalid {
                    message: format!("first agent `{first}` must not have internal predecessors"),
                });
            }
            if internal.iter().any(|e| &e.source == last) {
                issues.push(PlanIssue::Invalid {
                    message: format!("last agent `{last}` must not have internal successors"),
                });
            }
        }
        SplitMode::Parallel => {
            if !internal.is_empty() {
                issues.push(PlanIssue::Invalid {
                    message: "parallel agents cannot be connected to each other".into(),
                });
            }
        }
    }
    if !issues.is_empty() {
        return;
    }

    let original = lan.agent(&p.agent_name).expect("checked").clone();
    let index = lan.index_of(&p.agent_name).expect("checked");
    let preds: Vec<String> = lan.predecessors(&p.agent_name).into_iter().map(String::from).collect();
    let succs: Vec<String> = lan.successors(&p.agent_name).into_iter().map(String::from).collect();
    let requiring: Vec<(String, usize)> = succs
        .iter()
        .filter_map(|t| {
            let a = lan.agent(t)?;
            let pos = a.control.required_predecessors.iter().position(|r| r == &p.agent_name)?;
            Some((t.clone(), pos))
        })
        .collect();
    out.remove_agent(&p.agent_name);

    let assigned = |kind: ModuleKind| -> BTreeSet<String> {
        p.agents
            .iter()
            .flat_map(|s| match kind {
                ModuleKind::Control => s.cm_knowledge.iter(),
                ModuleKind::Execution => s.em_knowledge.iter(),
            })
            .map(|t| t.trim().to_string())
            .collect()
    };
    let mut new_agents = Vec::new();
    for (i, spec) in p.agents.iter().enumerate() {
        let mut a = build_agent(spec, now);
        for kind in [ModuleKind::Control, ModuleKind::Execution] {
            let (orig_items, _) = original.module(kind);
            // Keep the original item (with its origin and timestamp) when the
            // plan assigns an existing text.
            for item in a.knowledge_mut(kind).iter_mut() {
                if let Some(o) = orig_items.iter().find(|o| o.text.trim() == item.text) {
                    *item = o.clone();
                }
            }
            let taken = assigned(kind);
            for o in orig_items {
                if !taken.contains(o.text.trim()) {
                    a.knowledge_mut(kind).push(o.clone());
                }
            }
        }
        let inherits = match p.mode {
            SplitMode::Sequential => i == 0,
            SplitMode::Parallel => true,
        };
        if inherits {
            a.control.required_predecessors = original.control.required_predecessors.clone();
        }
        if force_cm || p.mode == SplitMode::Parallel {
            a.control.enabled = true;
        }
        new_agents.push(a);
    }
    for (offset, a) in new_agents.into_iter().enumerate() {
        out.agents.insert(index + offset, a);
    }

    let first = names[0].clone();
    let last = names[names.len() - 1].clone();
    for e in &internal {
        out.add_edge(&e.source, &e.target);
    }
    match p.mode {
        SplitMode::Sequential => {
            for s in &preds {
                out.add_edge(s, &first);
            }
            for t in &succs {
                out.add_edge(&last, t);
            }
        }
        SplitMode::Parallel => {
            for n in &names {
                for s in &preds {
                    out.add_edge(s, n);
                }
                for t in &succs {
                    out.add_edge(n, t);
                }
            }
        }
    }
    // Downstream agents that required the original now require its
    // replacement, or nothing when the replacement depends on the input.
    if p.mode == SplitMode::Sequential {
        for (t, pos) in requiring {
            let req = &mut out.agent_mut(&t).expect("successor exists").control.required_predecessors;
            req.insert(pos.min(req.len()), last.clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(name: &str) -> AgentSpec {
        AgentSpec {
            name: name.into(),
            subtask_description: format!("{name} subtask"),
            output_description: format!("{name} output"),
            cm_enabled: true,
            required_predecessors: vec![],
            cm_knowledge: vec![],
            em_knowledge: vec![],
        }
    }

    fn two() -> Lan {
        Lan::new("t", "i", "o")
            .with_agent(Agent::new("A", "a", "a").always_active())
            .with_agent(Agent::new("B", "b", "b"))
            .with_edge("A", "B")
    }

    #[test]
    fn cycle_is_rejected() {
        let plan = StrategyPlan::AddAgent(AddAgentParams {
            agent: spec("C"),
            predecessors: vec!["B".into()],
            successors: vec!["A".into()],
        });
        let err = validate_plan(&two(), &plan).unwrap_err();
        assert!(err.has_cycle());
    }

    #[test]
    fn sequential_split_rewires_ends() {
        let lan = Lan::new("t", "i", "o")
            .with_agent(Agent::new("In", "i", "i"))
            .with_agent(Agent::new("X", "x", "x"))
            .with_agent(Agent::new("Out", "o", "o"))
            .with_edge("In", "X")
            .with_edge("X", "Out");
        let plan = StrategyPlan::SplitAgent(SplitParams {
            agent_name: "X".into(),
            mode: SplitMode::Sequential,
            agents: vec![spec("X1"), spec("X2")],
            edges: None,
        });
        let out = apply_structure(&lan, &plan, DateTime::<Utc>::UNIX_EPOCH, false).unwrap();
        let names: Vec<_> = out.agent_names().collect();
        assert_eq!(names, vec!["In", "X1", "X2", "Out"]);
        assert!(out.has_edge("In", "X1") && out.has_edge("X1", "X2") && out.has_edge("X2", "Out"));
        assert_eq!(out.edges.len(), 3);
    }

    #[test]
    fn parallel_split_fans_out() {
        let plan = StrategyPlan::SplitAgent(SplitParams {
            agent_name: "A".into(),
            mode: SplitMode::Parallel,
            agents: vec![spec("P"), spec("Q")],
            edges: None,
        });
        let out = apply_structure(&two(), &plan, DateTime::<Utc>::UNIX_EPOCH, false).unwrap();
        assert!(out.has_edge("P", "B") && out.has_edge("Q", "B"));
        assert!(out.agents.iter().take(2).all(|a| a.control.enabled));
    }

    #[test]
    fn unassigned_knowledge_is_copied_to_every_part() {
        let mut lan = two();
        let t = DateTime::<Utc>::UNIX_EPOCH;
        lan.agents[0]
            .execution
            .knowledge
            .push(KnowledgeItem::new("keep idioms", KnowledgeOrigin::User, t));
        let plan = StrategyPlan::SplitAgent(SplitParams {
            agent_name: "A".into(),
            mode: SplitMode::Sequential,
            agents: vec![spec("P"), spec("Q")],
            edges: None,
        });
        let out = apply_structure(&lan, &plan, t, false).unwrap();
        for n in ["P", "Q"] {
            assert_eq!(out.agent(n).unwrap().execution.knowledge[0].text, "keep idioms");
        }
    }

    #[test]
    fn parameters_round_trip() {
        let plan = StrategyPlan::AddEmKnowledge(KnowledgeParams {
            agent_name: "A".into(),
            knowledge: "k".into(),
        });
        let back = StrategyPlan::from_parameters(Strategy::AddEmKnowledge, plan.parameters()).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn add_inputs_needs_a_new_edge() {
        let plan = StrategyPlan::AddInputs(AddInputsParams {
            agent_name: "B".into(),
            sources: vec!["A".into()],
        });
        assert!(validate_plan(&two(), &plan).is_err());
    }
}
