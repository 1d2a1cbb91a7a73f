use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::lan::{Lan, EXTERNAL_INPUT};

/// The editable text fields of an agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentField {
    Name,
    SubtaskDescription,
    OutputDescription,
}

impl fmt::Display for AgentField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentField::Name => "name",
            AgentField::SubtaskDescription => "subtask_description",
            AgentField::OutputDescription => "output_description",
        })
    }
}

/// A reason the editor refuses to save a network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Violation {
    /// Agents forming one strongly connected component, in insertion order.
    #[serde(rename = "CycleViolation")]
    Cycle { agents: Vec<String> },
    #[serde(rename = "EmptyField")]
    EmptyField {
        agent_index: usize,
        agent: String,
        field: AgentField,
    },
    #[serde(rename = "DuplicateName")]
    DuplicateName { name: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { agents } => write!(f, "cycle through {}", agents.join(" -> ")),
            Violation::EmptyField {
                agent_index,
                agent,
                field,
            } => write!(f, "agent #{agent_index} ({agent:?}) has an empty {field}"),
            Violation::DuplicateName { name } => write!(f, "duplicate agent name {name:?}"),
        }
    }
}

/// Problems that make a document unusable regardless of save rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructureIssue {
    DanglingEdge { source: String, target: String },
    DuplicateEdge { source: String, target: String },
    ReservedName { name: String },
    RequiredNotPredecessor { agent: String, required: String },
}

impl fmt::Display for StructureIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureIssue::DanglingEdge { source, target } => {
                write!(f, "edge {source} -> {target} names a missing agent")
            }
            StructureIssue::DuplicateEdge { source, target } => {
                write!(f, "edge {source} -> {target} listed twice")
            }
            StructureIssue::ReservedName { name } => write!(f, "agent name {name:?} is reserved"),
            StructureIssue::RequiredNotPredecessor { agent, required } => {
                write!(f, "{agent} requires {required}, which is not a predecessor")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("network contains a cycle through {agents:?}")]
pub struct CycleError {
    pub agents: Vec<String>,
}

/// Checks the three save-blocking rules: cycles, empty name/subtask/output
/// descriptions and duplicate names. An empty result means the network can be saved.
pub fn validate_lan(lan: &Lan) -> Vec<Violation> {
    let mut out = Vec::new();

    for component in strongly_connected(lan) {
        out.push(Violation::Cycle {
            agents: component
                .into_iter()
                .map(|i| lan.agents[i].name.clone())
                .collect(),
        });
    }

    for (i, agent) in lan.agents.iter().enumerate() {
        let fields = [
            (AgentField::Name, &agent.name),
            (AgentField::SubtaskDescription, &agent.execution.subtask_description),
            (AgentField::OutputDescription, &agent.execution.output_description),
        ];
        for (field, value) in fields {
            if value.trim().is_empty() {
                out.push(Violation::EmptyField {
                    agent_index: i,
                    agent: agent.name.clone(),
                    field,
                });
            }
        }
    }

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut first_seen = Vec::new();
    for agent in &lan.agents {
        let c = counts.entry(agent.name.as_str()).or_insert(0);
        *c += 1;
        if *c == 2 && !agent.name.trim().is_empty() {
            first_seen.push(agent.name.clone());
        }
    }
    out.extend(
        first_seen
            .into_iter()
            .map(|name| Violation::DuplicateName { name }),
    );
    out
}

/// Integrity problems beyond the save rules (dangling edges, reserved labels,
/// required predecessors that are not wired in).
pub fn structural_issues(lan: &Lan) -> Vec<StructureIssue> {
    let names: BTreeSet<&str> = lan.agent_names().collect();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for e in &lan.edges {
        if !names.contains(e.source.as_str()) || !names.contains(e.target.as_str()) {
            out.push(StructureIssue::DanglingEdge {
                source: e.source.clone(),
                target: e.target.clone(),
            });
        }
        if !seen.insert(e) {
            out.push(StructureIssue::DuplicateEdge {
                source: e.source.clone(),
                target: e.target.clone(),
            });
        }
    }
    for agent in &lan.agents {
        if agent.name == EXTERNAL_INPUT {
            out.push(StructureIssue::ReservedName {
                name: agent.name.clone(),
            });
        }
        for req in &agent.control.required_predecessors {
            if !lan.has_edge(req, &agent.name) {
                out.push(StructureIssue::RequiredNotPredecessor {
                    agent: agent.name.clone(),
                    required: req.clone(),
                });
            }
        }
    }
    out
}

/// Execution order: every edge points forward, ties go to the agent inserted first.
pub fn topological_order(lan: &Lan) -> Result<Vec<String>, CycleError> {
    let index = name_index(lan);
    let n = lan.agents.len();
    let mut indegree = vec![0usize; n];
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (s, t) in resolved_edges(lan, &index) {
        indegree[t] += 1;
        out_edges[s].push(t);
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &t in &out_edges[i] {
            indegree[t] -= 1;
            if indegree[t] == 0 {
                ready.insert(t);
            }
        }
    }
    if order.len() != n {
        let placed: BTreeSet<usize> = order.iter().copied().collect();
        return Err(CycleError {
            agents: (0..n)
                .filter(|i| !placed.contains(i))
                .map(|i| lan.agents[i].name.clone())
                .collect(),
        });
    }
    Ok(order
        .into_iter()
        .map(|i| lan.agents[i].name.clone())
        .collect())
}

fn name_index(lan: &Lan) -> BTreeMap<&str, usize> {
    let mut index = BTreeMap::new();
    for (i, a) in lan.agents.iter().enumerate() {
        index.entry(a.name.as_str()).or_insert(i);
    }
    index
}

fn resolved_edges(lan: &Lan, index: &BTreeMap<&str, usize>) -> BTreeSet<(usize, usize)> {
    lan.edges
        .iter()
        .filter_map(|e| Some((*index.get(e.source.as_str())?, *index.get(e.target.as_str())?)))
        .collect()
}

/// Tarjan's algorithm; returns only the components that contain a cycle.
fn strongly_connected(lan: &Lan) -> Vec<Vec<usize>> {
    struct State {
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }

    fn visit(v: usize, adj: &[Vec<usize>], st: &mut State) {
        st.index[v] = Some(st.next);
        st.low[v] = st.next;
        st.next += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for &w in &adj[v] {
            match st.index[w] {
                None => {
                    visit(w, adj, st);
                    st.low[v] = st.low[v].min(st.low[w]);
                }
                Some(wi) if st.on_stack[w] => st.low[v] = st.low[v].min(wi),
                Some(_) => {}
            }
        }
        if Some(st.low[v]) == st.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = st.stack.pop().expect("tarjan stack underflow");
                st.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            let self_loop = comp.len() == 1 && adj[v].contains(&v);
            if comp.len() > 1 || self_loop {
                comp.sort_unstable();
                st.out.push(comp);
            }
        }
    }

    let index = name_index(lan);
    let n = lan.agents.len();
    let mut adj = vec![Vec::new(); n];
    for (s, t) in resolved_edges(lan, &index) {
        adj[s].push(t);
    }
    let mut st = State {
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if st.index[v].is_none() {
            visit(v, &adj, &mut st);
        }
    }
    st.out.sort_by_key(|c| c[0]);
    st.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Agent;

    fn lan(names: &[&str], edges: &[(&str, &str)]) -> Lan {
        let mut l = Lan::new("task", "in", "out");
        for n in names {
            l.agents.push(Agent::new(*n, "do it", "a string"));
        }
        for (s, t) in edges {
            l.add_edge(s, t);
        }
        l
    }

    #[test]
    fn minimal_lan_is_valid() {
        let l = lan(&["Translator"], &[]);
        assert!(validate_lan(&l).is_empty());
    }

    #[test]
    fn two_cycle_is_reported() {
        let l = lan(&["A", "B"], &[("A", "B"), ("B", "A")]);
        assert_eq!(
            validate_lan(&l),
            vec![Violation::Cycle {
                agents: vec!["A".into(), "B".into()]
            }]
        );
        assert!(topological_order(&l).is_err());
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let l = lan(&["A"], &[("A", "A")]);
        assert_eq!(validate_lan(&l).len(), 1);
    }

    #[test]
    fn duplicate_names_reported_once() {
        let l = lan(&["X", "X", "X"], &[]);
        assert_eq!(
            validate_lan(&l),
            vec![Violation::DuplicateName { name: "X".into() }]
        );
    }

    #[test]
    fn empty_fields_are_reported_per_field() {
        let mut l = lan(&["A"], &[]);
        l.agents[0].execution.subtask_description = "  ".into();
        l.agents[0].execution.output_description.clear();
        let v = validate_lan(&l);
        assert_eq!(v.len(), 2);
        assert!(matches!(
            v[0],
            Violation::EmptyField {
                field: AgentField::SubtaskDescription,
                ..
            }
        ));
    }

    #[test]
    fn diamond_follows_insertion_order() {
        let l = lan(
            &["A", "B", "C", "D"],
            &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")],
        );
        assert_eq!(topological_order(&l).unwrap(), vec!["A", "B", "C", "D"]);
    }

    #[test]
    fn literal_translator_precedes_polisher() {
        let l = lan(
            &["RhymingPolisher", "LiteralTranslator"],
            &[("LiteralTranslator", "RhymingPolisher")],
        );
        assert_eq!(
            topological_order(&l).unwrap(),
            vec!["LiteralTranslator", "RhymingPolisher"]
        );
    }

    #[test]
    fn structural_issues_catch_dangling_and_reserved() {
        let mut l = lan(&["A", EXTERNAL_INPUT], &[("A", "Z")]);
        l.agents[0].control.required_predecessors.push("B".into());
        let issues = structural_issues(&l);
        assert_eq!(issues.len(), 3);
    }

    #[test]
    fn violation_json_shape() {
        let v = Violation::Cycle {
            agents: vec!["A".into(), "B".into()],
        };
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["kind"], "CycleViolation");
    }
}
