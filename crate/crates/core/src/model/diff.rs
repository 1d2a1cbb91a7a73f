//! Edit scripts between two networks and the modification distance derived
//! from them.
//!
//! A script is a sequence of editor operations (new agent, delete agent,
//! connect, disconnect, text edits, ...). The distance is the total
//! interaction cost of the script. Scripts are canonical, not minimal, so the
//! distance is an upper bound on the cheapest possible sequence of edits.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::lan::{Agent, Example, KnowledgeItem, Lan, ModuleKind};
use super::validate::AgentField;

/// A primitive user interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditAction {
    Click,
    Keypress,
    Drag,
    Select,
}

impl EditAction {
    pub const fn cost(self) -> u64 {
        match self {
            EditAction::Click | EditAction::Keypress => 1,
            EditAction::Drag | EditAction::Select => 2,
        }
    }
}

/// Network-level text fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanField {
    TaskDescription,
    InputDescription,
    OutputDescription,
}

/// One editor operation. Agent-level edits apply to the currently selected
/// agent; `NewAgent` selects the agent it creates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditOp {
    SetLanText {
        field: LanField,
        value: String,
        /// Whether existing text has to be selected and deleted first.
        replaces: bool,
    },
    NewAgent,
    SelectAgent {
        name: String,
    },
    DeleteAgent {
        name: String,
    },
    Connect {
        source: String,
        target: String,
    },
    Disconnect {
        source: String,
        target: String,
    },
    SetText {
        field: AgentField,
        value: String,
        replaces: bool,
    },
    SetEnabled {
        enabled: bool,
    },
    ToggleRequired {
        name: String,
    },
    AddKnowledge {
        module: ModuleKind,
        item: KnowledgeItem,
    },
    RemoveKnowledge {
        module: ModuleKind,
        index: usize,
    },
    AddExample {
        module: ModuleKind,
        example: Example,
    },
    RemoveExample {
        module: ModuleKind,
        index: usize,
    },
}

impl EditOp {
    /// The primitive interactions this operation takes, with multiplicity.
    pub fn actions(&self) -> Vec<(EditAction, u64)> {
        use EditAction::*;
        let typing = |text: &str, replaces: bool| {
            let mut v = Vec::new();
            if replaces {
                v.push((Select, 1));
                v.push((Keypress, 1));
            }
            let n = text.chars().count() as u64;
            if n > 0 {
                v.push((Click, 1));
                v.push((Keypress, n));
            }
            v
        };
        match self {
            EditOp::SetLanText {
                value, replaces, ..
            }
            | EditOp::SetText {
                value, replaces, ..
            } => typing(value, *replaces),
            EditOp::NewAgent | EditOp::SelectAgent { .. } => vec![(Click, 1)],
            EditOp::DeleteAgent { .. } => vec![(Click, 1), (Keypress, 1)],
            EditOp::Connect { .. } => vec![(Drag, 1)],
            EditOp::Disconnect { .. }
            | EditOp::RemoveKnowledge { .. }
            | EditOp::RemoveExample { .. } => vec![(Select, 1), (Keypress, 1)],
            EditOp::SetEnabled { .. } | EditOp::ToggleRequired { .. } => vec![(Click, 1)],
            EditOp::AddKnowledge { item, .. } => {
                vec![(Click, 1), (Keypress, item.text.chars().count() as u64)]
            }
            EditOp::AddExample { example, .. } => {
                let chars: usize = example
                    .inputs
                    .iter()
                    .map(|e| e.value.chars().count())
                    .sum::<usize>()
                    + example.result.render().chars().count();
                vec![(Click, 1), (Keypress, chars as u64)]
            }
        }
    }

    pub fn cost(&self) -> u64 {
        self.actions().iter().map(|(a, n)| a.cost() * n).sum()
    }
}

impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EditOp::SetLanText { field, value, .. } => write!(f, "SetLanText({field:?}, {value:?})"),
            EditOp::NewAgent => f.write_str("NewAgent"),
            EditOp::SelectAgent { name } => write!(f, "SelectAgent({name:?})"),
            EditOp::DeleteAgent { name } => write!(f, "DeleteAgent({name:?})"),
            EditOp::Connect { source, target } => write!(f, "Connect({source} -> {target})"),
            EditOp::Disconnect { source, target } => write!(f, "Disconnect({source} -> {target})"),
            EditOp::SetText { field, value, .. } => match field {
                AgentField::Name => write!(f, "SetName({value:?})"),
                AgentField::SubtaskDescription => write!(f, "SetSubtask({value:?})"),
                AgentField::OutputDescription => write!(f, "SetOutputDescription({value:?})"),
            },
            EditOp::SetEnabled { enabled } => write!(f, "SetEnabled({enabled})"),
            EditOp::ToggleRequired { name } => write!(f, "ToggleRequired({name:?})"),
            EditOp::AddKnowledge { module, item } => {
                write!(f, "AddKnowledge({}, {:?})", module.short(), item.text)
            }
            EditOp::RemoveKnowledge { module, index } => {
                write!(f, "RemoveKnowledge({}, #{index})", module.short())
            }
            EditOp::AddExample { module, example } => {
                write!(f, "AddExample({}, {})", module.short(), example.provenance)
            }
            EditOp::RemoveExample { module, index } => {
                write!(f, "RemoveExample({}, #{index})", module.short())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("edit #{index} cannot be applied: {message}")]
pub struct ApplyError {
    pub index: usize,
    pub message: String,
}

/// Canonical script turning `old` into `new`. Both networks should have unique
/// agent names.
pub fn lan_edit_script(old: &Lan, new: &Lan) -> Vec<EditOp> {
    let mut ops = Vec::new();
    let mut work = old.clone();

    for (field, from, to) in [
        (LanField::TaskDescription, &old.task_description, &new.task_description),
        (LanField::InputDescription, &old.input_description, &new.input_description),
        (LanField::OutputDescription, &old.output_description, &new.output_description),
    ] {
        if from != to {
            ops.push(EditOp::SetLanText {
                field,
                value: to.clone(),
                replaces: !from.is_empty(),
            });
        }
    }

    // Agents kept in place: the longest prefix of `new` whose names occur in
    // `old` in the same relative order. Everything else is deleted or created.
    let old_names: Vec<&str> = old.agent_names().collect();
    let new_names: Vec<&str> = new.agent_names().collect();
    let (kept_idx, kept_count) = greedy_prefix(&old_names, &new_names);
    let kept_old: Vec<&str> = kept_idx.iter().map(|&i| old_names[i]).collect();

    for name in &old_names {
        if !kept_old.contains(name) {
            ops.push(EditOp::DeleteAgent {
                name: name.to_string(),
            });
            work.remove_agent(name);
        }
    }

    let stale_edges: Vec<_> = work
        .edges
        .iter()
        .filter(|e| !new.has_edge(&e.source, &e.target))
        .cloned()
        .collect();
    for e in stale_edges {
        ops.push(EditOp::Disconnect {
            source: e.source.clone(),
            target: e.target.clone(),
        });
        work.remove_edge(&e.source, &e.target);
    }

    for target in &new.agents[..kept_count] {
        let current = work.agent(&target.name).expect("kept agent present").clone();
        let edits = agent_edits(&current, target);
        if !edits.is_empty() {
            ops.push(EditOp::SelectAgent {
                name: target.name.clone(),
            });
            ops.extend(edits);
        }
    }

    for target in &new.agents[kept_count..] {
        ops.push(EditOp::NewAgent);
        ops.extend(agent_edits(&Agent::blank(), target));
    }

    for e in &new.edges {
        if !work.has_edge(&e.source, &e.target) {
            ops.push(EditOp::Connect {
                source: e.source.clone(),
                target: e.target.clone(),
            });
            work.add_edge(&e.source, &e.target);
        }
    }
    ops
}

/// Modification distance: the interaction cost of the canonical edit script.
pub fn lmd(old: &Lan, new: &Lan) -> u64 {
    script_cost(&lan_edit_script(old, new))
}

pub fn script_cost(ops: &[EditOp]) -> u64 {
    ops.iter().map(EditOp::cost).sum()
}

/// Replays a script on a copy of `lan`.
pub fn apply_edit_script(lan: &Lan, ops: &[EditOp]) -> Result<Lan, ApplyError> {
    let mut work = lan.clone();
    let mut selected: Option<usize> = None;
    for (index, op) in ops.iter().enumerate() {
        let fail = |message: String| ApplyError { index, message };
        match op {
            EditOp::SetLanText { field, value, .. } => {
                let slot = match field {
                    LanField::TaskDescription => &mut work.task_description,
                    LanField::InputDescription => &mut work.input_description,
                    LanField::OutputDescription => &mut work.output_description,
                };
                *slot = value.clone();
            }
            EditOp::NewAgent => {
                work.agents.push(Agent::blank());
                selected = Some(work.agents.len() - 1);
            }
            EditOp::SelectAgent { name } => {
                selected = Some(
                    work.index_of(name)
                        .ok_or_else(|| fail(format!("no agent {name:?}")))?,
                );
            }
            EditOp::DeleteAgent { name } => {
                work.remove_agent(name)
                    .ok_or_else(|| fail(format!("no agent {name:?}")))?;
                selected = None;
            }
            EditOp::Connect { source, target } => {
                work.add_edge(source, target);
            }
            EditOp::Disconnect { source, target } => {
                if !work.remove_edge(source, target) {
                    return Err(fail(format!("no edge {source} -> {target}")));
                }
            }
            _ => {
                let idx = selected.ok_or_else(|| fail("no agent selected".into()))?;
                apply_agent_op(&mut work, idx, op).map_err(fail)?;
            }
        }
    }
    Ok(work)
}

fn apply_agent_op(work: &mut Lan, idx: usize, op: &EditOp) -> Result<(), String> {
    match op {
        EditOp::SetText { field, value, .. } => match field {
            AgentField::Name => {
                let old = std::mem::replace(&mut work.agents[idx].name, value.clone());
                if !old.is_empty() {
                    rename_references(work, &old, value);
                }
            }
            AgentField::SubtaskDescription => {
                work.agents[idx].execution.subtask_description = value.clone()
            }
            AgentField::OutputDescription => {
                work.agents[idx].execution.output_description = value.clone()
            }
        },
        EditOp::SetEnabled { enabled } => work.agents[idx].control.enabled = *enabled,
        EditOp::ToggleRequired { name } => {
            let req = &mut work.agents[idx].control.required_predecessors;
            match req.iter().position(|r| r == name) {
                Some(p) => {
                    req.remove(p);
                }
                None => req.push(name.clone()),
            }
        }
        EditOp::AddKnowledge { module, item } => {
            work.agents[idx].knowledge_mut(*module).push(item.clone())
        }
        EditOp::RemoveKnowledge { module, index } => {
            let list = work.agents[idx].knowledge_mut(*module);
            if *index >= list.len() {
                return Err(format!("no knowledge item #{index}"));
            }
            list.remove(*index);
        }
        EditOp::AddExample { module, example } => {
            work.agents[idx].examples_mut(*module).push(example.clone())
        }
        EditOp::RemoveExample { module, index } => {
            let list = work.agents[idx].examples_mut(*module);
            if *index >= list.len() {
                return Err(format!("no example #{index}"));
            }
            list.remove(*index);
        }
        _ => unreachable!("network-level op routed to agent handler"),
    }
    Ok(())
}

fn rename_references(work: &mut Lan, old: &str, new: &str) {
    for e in &mut work.edges {
        if e.source == old {
            e.source = new.to_string();
        }
        if e.target == old {
            e.target = new.to_string();
        }
    }
    for a in &mut work.agents {
        for r in &mut a.control.required_predecessors {
            if r == old {
                *r = new.to_string();
            }
        }
    }
}

/// Ops that turn the selected agent `current` into `target`.
fn agent_edits(current: &Agent, target: &Agent) -> Vec<EditOp> {
    let mut ops = Vec::new();
    for (field, from, to) in [
        (AgentField::Name, &current.name, &target.name),
        (
            AgentField::SubtaskDescription,
            &current.execution.subtask_description,
            &target.execution.subtask_description,
        ),
        (
            AgentField::OutputDescription,
            &current.execution.output_description,
            &target.execution.output_description,
        ),
    ] {
        if from != to {
            ops.push(EditOp::SetText {
                field,
                value: to.clone(),
                replaces: !from.is_empty(),
            });
        }
    }
    if current.control.enabled != target.control.enabled {
        ops.push(EditOp::SetEnabled {
            enabled: target.control.enabled,
        });
    }

    let (kept, n) = greedy_prefix(
        &current.control.required_predecessors,
        &target.control.required_predecessors,
    );
    for (i, name) in current.control.required_predecessors.iter().enumerate() {
        if !kept.contains(&i) {
            ops.push(EditOp::ToggleRequired { name: name.clone() });
        }
    }
    for name in &target.control.required_predecessors[n..] {
        ops.push(EditOp::ToggleRequired { name: name.clone() });
    }

    for module in [ModuleKind::Control, ModuleKind::Execution] {
        let (cur_k, cur_e) = current.module(module);
        let (tgt_k, tgt_e) = target.module(module);
        let (kept, n) = greedy_prefix(cur_k, tgt_k);
        for index in (0..cur_k.len()).rev().filter(|i| !kept.contains(i)) {
            ops.push(EditOp::RemoveKnowledge { module, index });
        }
        for item in &tgt_k[n..] {
            ops.push(EditOp::AddKnowledge {
                module,
                item: item.clone(),
            });
        }
        let (kept, n) = greedy_prefix(cur_e, tgt_e);
        for index in (0..cur_e.len()).rev().filter(|i| !kept.contains(i)) {
            ops.push(EditOp::RemoveExample { module, index });
        }
        for example in &tgt_e[n..] {
            ops.push(EditOp::AddExample {
                module,
                example: example.clone(),
            });
        }
    }
    ops
}

/// Matches the longest prefix of `target` as a subsequence of `current`.
/// Returns the matched indices into `current` and the prefix length.
fn greedy_prefix<T: PartialEq>(current: &[T], target: &[T]) -> (Vec<usize>, usize) {
    let mut matched = Vec::new();
    let mut from = 0;
    for t in target {
        match current[from..].iter().position(|c| c == t) {
            Some(off) => {
                matched.push(from + off);
                from += off + 1;
            }
            None => break,
        }
    }
    let n = matched.len();
    (matched, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Lan {
        Lan::new("task", "in", "out")
            .with_agent(Agent::new("A", "a", "a"))
            .with_agent(Agent::new("B", "b", "b"))
    }

    #[test]
    fn identical_is_empty() {
        assert!(lan_edit_script(&base(), &base()).is_empty());
        assert_eq!(lmd(&base(), &base()), 0);
    }

    #[test]
    fn new_isolated_agent() {
        let mut x = Agent::blank();
        x.name = "X".into();
        let new = base().with_agent(x);
        let script = lan_edit_script(&base(), &new);
        assert_eq!(
            script,
            vec![
                EditOp::NewAgent,
                EditOp::SetText {
                    field: AgentField::Name,
                    value: "X".into(),
                    replaces: false
                }
            ]
        );
        assert_eq!(script[1].to_string(), "SetName(\"X\")");
        // click + (click + one keypress)
        assert_eq!(lmd(&base(), &new), 3);
    }

    #[test]
    fn edge_costs() {
        let with = base().with_edge("A", "B");
        assert_eq!(lmd(&base(), &with), 2);
        assert_eq!(lmd(&with, &base()), 3);
    }

    #[test]
    fn replacing_text_costs_delete_plus_typing() {
        let mut new = base();
        new.agents[0].execution.subtask_description = "xyz".into();
        // select agent 1 + select 2 + delete 1 + click 1 + 3 keys
        assert_eq!(lmd(&base(), &new), 8);
    }

    #[test]
    fn reorder_rebuilds_out_of_order_agents() {
        let mut new = base();
        new.agents.reverse();
        let script = lan_edit_script(&base(), &new);
        assert_eq!(apply_edit_script(&base(), &script).unwrap(), new);
    }

    #[test]
    fn apply_rejects_missing_agent() {
        let err = apply_edit_script(
            &base(),
            &[EditOp::SelectAgent {
                name: "nope".into(),
            }],
        )
        .unwrap_err();
        assert_eq!(err.index, 0);
    }

    #[test]
    fn edit_action_costs() {
        assert_eq!(EditAction::Click.cost(), 1);
        assert_eq!(EditAction::Keypress.cost(), 1);
        assert_eq!(EditAction::Drag.cost(), 2);
        assert_eq!(EditAction::Select.cost(), 2);
    }
}
