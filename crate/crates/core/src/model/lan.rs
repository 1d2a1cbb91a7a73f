use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Label reserved for the network's external input inside [`NamedValues`].
pub const EXTERNAL_INPUT: &str = "__input__";

/// Subtask text given to agents created from the editor's "new agent" button.
pub const BLANK_SUBTASK: &str = "Describe the subtask of this agent.";
/// Output description given to agents created from the editor's "new agent" button.
pub const BLANK_OUTPUT: &str = "Describe the output of this agent.";

/// A network of LLM agents wired into a DAG, plus the task it solves.
///
/// Agent order is significant: it is the tie-breaker for execution order.
/// Edges are a set; equality ignores their storage order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lan {
    pub task_description: String,
    pub input_description: String,
    pub output_description: String,
    pub agents: Vec<Agent>,
    pub edges: Vec<Edge>,
}

impl PartialEq for Lan {
    fn eq(&self, other: &Self) -> bool {
        self.task_description == other.task_description
            && self.input_description == other.input_description
            && self.output_description == other.output_description
            && self.agents == other.agents
            && self.edge_set() == other.edge_set()
    }
}

impl Lan {
    pub fn new(
        task_description: impl Into<String>,
        input_description: impl Into<String>,
        output_description: impl Into<String>,
    ) -> Self {
        Self {
            task_description: task_description.into(),
            input_description: input_description.into(),
            output_description: output_description.into(),
            agents: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn with_agent(mut self, agent: Agent) -> Self {
        self.agents.push(agent);
        self
    }

    pub fn with_edge(mut self, source: &str, target: &str) -> Self {
        self.add_edge(source, target);
        self
    }

    pub fn agent(&self, name: &str) -> Option<&Agent> {
        self.agents.iter().find(|a| a.name == name)
    }

    pub fn agent_mut(&mut self, name: &str) -> Option<&mut Agent> {
        self.agents.iter_mut().find(|a| a.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.name == name)
    }

    pub fn agent_names(&self) -> impl Iterator<Item = &str> {
        self.agents.iter().map(|a| a.name.as_str())
    }

    pub fn edge_set(&self) -> BTreeSet<&Edge> {
        self.edges.iter().collect()
    }

    pub fn has_edge(&self, source: &str, target: &str) -> bool {
        self.edges
            .iter()
            .any(|e| e.source == source && e.target == target)
    }

    /// Adds an edge unless it is already present. Returns whether it was added.
    pub fn add_edge(&mut self, source: &str, target: &str) -> bool {
        if self.has_edge(source, target) {
            return false;
        }
        self.edges.push(Edge::new(source, target));
        true
    }

    /// Removes an edge. A required-predecessor entry that the edge justified is
    /// dropped with it.
    pub fn remove_edge(&mut self, source: &str, target: &str) -> bool {
        let before = self.edges.len();
        self.edges
            .retain(|e| !(e.source == source && e.target == target));
        let removed = self.edges.len() != before;
        if removed {
            if let Some(agent) = self.agent_mut(target) {
                agent.control.required_predecessors.retain(|p| p != source);
            }
        }
        removed
    }

    /// Removes an agent together with its incoming and outgoing edges.
    pub fn remove_agent(&mut self, name: &str) -> Option<Agent> {
        let idx = self.index_of(name)?;
        let agent = self.agents.remove(idx);
        self.edges.retain(|e| e.source != name && e.target != name);
        for other in &mut self.agents {
            other.control.required_predecessors.retain(|p| p != name);
        }
        Some(agent)
    }

    /// Renames an agent everywhere it is referenced: edges, required
    /// predecessors and the input labels of stored examples.
    pub fn rename_agent(&mut self, from: &str, to: &str) -> bool {
        let Some(agent) = self.agent_mut(from) else {
            return false;
        };
        agent.name = to.to_string();
        for e in &mut self.edges {
            if e.source == from {
                e.source = to.to_string();
            }
            if e.target == from {
                e.target = to.to_string();
            }
        }
        for a in &mut self.agents {
            for p in &mut a.control.required_predecessors {
                if p == from {
                    *p = to.to_string();
                }
            }
            for ex in a.control.examples.iter_mut().chain(a.execution.examples.iter_mut()) {
                ex.inputs.relabel(from, to);
            }
        }
        true
    }

    /// Direct predecessors of `name`, in agent insertion order.
    pub fn predecessors(&self, name: &str) -> Vec<&str> {
        self.agents
            .iter()
            .map(|a| a.name.as_str())
            .filter(|a| self.has_edge(a, name))
            .collect()
    }

    /// Direct successors of `name`, in agent insertion order.
    pub fn successors(&self, name: &str) -> Vec<&str> {
        self.agents
            .iter()
            .map(|a| a.name.as_str())
            .filter(|a| self.has_edge(name, a))
            .collect()
    }

    /// Every agent with a directed path to `name`.
    pub fn ancestors(&self, name: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![name.to_string()];
        while let Some(current) = stack.pop() {
            for e in self.edges.iter().filter(|e| e.target == current) {
                if seen.insert(e.source.clone()) {
                    stack.push(e.source.clone());
                }
            }
        }
        seen.remove(name);
        seen
    }
}

/// Directed connection: the target's input module receives the source's output.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(String, String)", into = "(String, String)")]
pub struct Edge {
    pub source: String,
    pub target: String,
}

impl Edge {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
        }
    }
}

impl From<(String, String)> for Edge {
    fn from((source, target): (String, String)) -> Self {
        Self { source, target }
    }
}

impl From<Edge> for (String, String) {
    fn from(e: Edge) -> Self {
        (e.source, e.target)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub name: String,
    pub control: ControlModule,
    pub execution: ExecutionModule,
}

impl Agent {
    pub fn new(
        name: impl Into<String>,
        subtask_description: impl Into<String>,
        output_description: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            control: ControlModule::default(),
            execution: ExecutionModule {
                subtask_description: subtask_description.into(),
                output_description: output_description.into(),
                knowledge: Vec::new(),
                examples: Vec::new(),
            },
        }
    }

    /// The agent the editor creates before the user fills anything in.
    pub fn blank() -> Self {
        Self::new("", BLANK_SUBTASK, BLANK_OUTPUT)
    }

    /// Builder: CM disabled, i.e. the agent runs on every input.
    pub fn always_active(mut self) -> Self {
        self.control.enabled = false;
        self
    }

    pub fn module(&self, kind: ModuleKind) -> (&[KnowledgeItem], &[Example]) {
        match kind {
            ModuleKind::Control => (&self.control.knowledge, &self.control.examples),
            ModuleKind::Execution => (&self.execution.knowledge, &self.execution.examples),
        }
    }

    pub fn knowledge_mut(&mut self, kind: ModuleKind) -> &mut Vec<KnowledgeItem> {
        match kind {
            ModuleKind::Control => &mut self.control.knowledge,
            ModuleKind::Execution => &mut self.execution.knowledge,
        }
    }

    pub fn examples_mut(&mut self, kind: ModuleKind) -> &mut Vec<Example> {
        match kind {
            ModuleKind::Control => &mut self.control.examples,
            ModuleKind::Execution => &mut self.execution.examples,
        }
    }
}

/// The activation gate of an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlModule {
    /// When false the agent is activated on every input without asking the model.
    pub enabled: bool,
    pub required_predecessors: Vec<String>,
    pub knowledge: Vec<KnowledgeItem>,
    pub examples: Vec<Example>,
}

impl Default for ControlModule {
    fn default() -> Self {
        Self {
            enabled: true,
            required_predecessors: Vec::new(),
            knowledge: Vec::new(),
            examples: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionModule {
    pub subtask_description: String,
    pub output_description: String,
    pub knowledge: Vec<KnowledgeItem>,
    pub examples: Vec<Example>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    Control,
    Execution,
}

impl ModuleKind {
    pub fn short(self) -> &'static str {
        match self {
            ModuleKind::Control => "cm",
            ModuleKind::Execution => "em",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeOrigin {
    User,
    Pipeline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeItem {
    pub text: String,
    pub origin: KnowledgeOrigin,
    pub created_at: DateTime<Utc>,
}

impl KnowledgeItem {
    pub fn new(text: impl Into<String>, origin: KnowledgeOrigin, created_at: DateTime<Utc>) -> Self {
        Self {
            text: text.into(),
            origin,
            created_at,
        }
    }
}

/// A recorded module invocation used as a few-shot example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub inputs: NamedValues,
    pub result: ExampleResult,
    /// Identifier of the training example this record came from.
    pub provenance: String,
}

/// `Activation` for CM examples, `Output` for EM examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExampleResult {
    Activation(bool),
    Output(String),
}

impl ExampleResult {
    pub fn render(&self) -> String {
        match self {
            ExampleResult::Activation(b) => b.to_string(),
            ExampleResult::Output(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedValue {
    pub source: String,
    pub value: String,
}

/// Values received by an agent, each labelled with where it came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NamedValues {
    pub entries: Vec<NamedValue>,
}

impl NamedValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn external(value: impl Into<String>) -> Self {
        let mut nv = Self::new();
        nv.insert(EXTERNAL_INPUT, value);
        nv
    }

    pub fn get(&self, source: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.source == source)
            .map(|e| e.value.as_str())
    }

    pub fn contains(&self, source: &str) -> bool {
        self.get(source).is_some()
    }

    /// Inserts or overwrites the entry labelled `source`.
    pub fn insert(&mut self, source: impl Into<String>, value: impl Into<String>) {
        let source = source.into();
        let value = value.into();
        match self.entries.iter_mut().find(|e| e.source == source) {
            Some(e) => e.value = value,
            None => self.entries.push(NamedValue { source, value }),
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.source.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = &NamedValue> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when every entry of `self` appears, with the same value, in `other`.
    pub fn is_subset_of(&self, other: &NamedValues) -> bool {
        self.entries
            .iter()
            .all(|e| other.get(&e.source) == Some(e.value.as_str()))
    }

    pub fn has_unique_labels(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.entries.iter().all(|e| seen.insert(e.source.as_str()))
    }

    /// Renames an entry label, keeping its position.
    pub fn relabel(&mut self, from: &str, to: &str) {
        for e in &mut self.entries {
            if e.source == from {
                e.source = to.to_string();
            }
        }
    }
}

impl FromIterator<(String, String)> for NamedValues {
    fn from_iter<T: IntoIterator<Item = (String, String)>>(iter: T) -> Self {
        let mut nv = NamedValues::new();
        for (s, v) in iter {
            nv.insert(s, v);
        }
        nv
    }
}
