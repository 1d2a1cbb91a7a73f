//! Independent oracle for the save rules, plus a generator that injects
//! cycles, blank fields and duplicate names into valid networks.

use std::collections::{BTreeMap, BTreeSet};

use lanforge_core::model::{topological_order, validate_lan, AgentField, Lan, Violation};
use proptest::prelude::*;

use super::arb_lan;

/// A valid network with zero or more injected faults.
pub fn arb_faulty_lan() -> impl Strategy<Value = Lan> {
    (
        arb_lan(6),
        proptest::collection::vec((0usize..6, 0usize..3), 0..3),
        proptest::option::of((0usize..6, 0usize..6)),
        any::<bool>(),
    )
        .prop_map(|(mut lan, blank, duplicate, cycle)| {
            let n = lan.agents.len();
            if cycle && n >= 1 {
                let order = topological_order(&lan).unwrap();
                let (first, last) = (order[0].clone(), order[n - 1].clone());
                if first == last {
                    lan.add_edge(&first, &first);
                } else {
                    lan.add_edge(&first, &last);
                    lan.add_edge(&last, &first);
                }
            }
            if let Some((a, b)) = duplicate {
                let (a, b) = (a % n, b % n);
                if a != b {
                    let name = lan.agents[a].name.clone();
                    lan.agents[b].name = name;
                }
            }
            for (i, f) in blank {
                let a = &mut lan.agents[i % n];
                match f {
                    0 => a.name = String::new(),
                    1 => a.execution.subtask_description = " ".into(),
                    _ => a.execution.output_description = String::new(),
                }
            }
            lan
        })
}

/// Cycle detection over agent positions by repeated removal of sources;
/// edge endpoints resolve to the first agent carrying the name.
pub fn has_cycle_by_index(lan: &Lan) -> bool {
    let idx = |name: &str| lan.agents.iter().position(|a| a.name == name);
    let mut edges: BTreeSet<(usize, usize)> = lan
        .edges
        .iter()
        .filter_map(|e| Some((idx(&e.source)?, idx(&e.target)?)))
        .collect();
    let mut alive: BTreeSet<usize> = (0..lan.agents.len()).collect();
    loop {
        let source = alive.iter().copied().find(|&v| !edges.iter().any(|&(_, t)| t == v));
        match source {
            Some(v) => {
                alive.remove(&v);
                edges.retain(|&(s, _)| s != v);
            }
            None => return !alive.is_empty(),
        }
    }
}

/// `validate_lan` reports exactly the faults the oracle finds.
pub fn check_violations(lan: &Lan) -> Result<(), TestCaseError> {
    let violations = validate_lan(lan);
    let expected_blank: BTreeSet<(usize, AgentField)> = lan
        .agents
        .iter()
        .enumerate()
        .flat_map(|(i, a)| {
            let mut v = Vec::new();
            if a.name.trim().is_empty() {
                v.push((i, AgentField::Name));
            }
            if a.execution.subtask_description.trim().is_empty() {
                v.push((i, AgentField::SubtaskDescription));
            }
            if a.execution.output_description.trim().is_empty() {
                v.push((i, AgentField::OutputDescription));
            }
            v
        })
        .collect();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in &lan.agents {
        *counts.entry(a.name.as_str()).or_default() += 1;
    }
    let expected_dups: BTreeSet<String> = counts
        .iter()
        .filter(|(k, c)| **c > 1 && !k.trim().is_empty())
        .map(|(k, _)| k.to_string())
        .collect();
    let has_cycle = has_cycle_by_index(lan);

    let mut got_blank = BTreeSet::new();
    let mut got_dups = BTreeSet::new();
    let mut got_cycle = false;
    for v in &violations {
        match v {
            Violation::EmptyField { agent_index, field, .. } => {
                got_blank.insert((*agent_index, *field));
            }
            Violation::DuplicateName { name } => {
                got_dups.insert(name.clone());
            }
            Violation::Cycle { .. } => got_cycle = true,
        }
    }
    let clean = !has_cycle && expected_blank.is_empty() && counts.values().all(|c| *c == 1);
    prop_assert_eq!(got_blank, expected_blank);
    prop_assert_eq!(got_dups, expected_dups);
    prop_assert_eq!(got_cycle, has_cycle);
    prop_assert_eq!(violations.is_empty(), clean);
    Ok(())
}
