#![allow(dead_code)]

pub mod history_world;
pub mod reference;
pub mod validation;

use chrono::{TimeZone, Utc};
use lanforge_core::model::{
    Agent, Example, ExampleResult, KnowledgeItem, KnowledgeOrigin, Lan, NamedValues,
};
use proptest::prelude::*;

pub fn knowledge(text: &str) -> KnowledgeItem {
    KnowledgeItem::new(text, KnowledgeOrigin::User, Utc.timestamp_opt(1_700_000_000, 0).unwrap())
}

fn text() -> impl Strategy<Value = String> {
    "[a-z ]{1,12}".prop_filter("non-blank", |s| !s.trim().is_empty())
}

fn arb_example(cm: bool, sources: Vec<String>) -> impl Strategy<Value = Example> {
    (text(), proptest::sample::subsequence(sources.clone(), 0..=sources.len()), any::<bool>(), text(), "[a-z0-9]{1,4}").prop_map(
        move |(ext, preds, flag, out, prov)| {
            let mut inputs = NamedValues::external(ext);
            for p in preds {
                inputs.insert(p.clone(), format!("from {p}"));
            }
            Example {
                inputs,
                result: if cm { ExampleResult::Activation(flag) } else { ExampleResult::Output(out) },
                provenance: prov,
            }
        },
    )
}

/// Edge candidates `(i, j)` with `order[i] < order[j]`, so any subset is acyclic.
fn forward_pairs(order: &[usize]) -> Vec<(usize, usize)> {
    let n = order.len();
    let mut rank = vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rank[i] < rank[j] {
                out.push((i, j));
            }
        }
    }
    out
}

/// A valid network: unique names, acyclic edges whose direction is
/// independent of insertion order, required predecessors drawn from actual
/// predecessors, and some knowledge and examples.
pub fn arb_lan(max_agents: usize) -> impl Strategy<Value = Lan> {
    (1..=max_agents)
        .prop_flat_map(|n| {
            let order = Just((0..n).collect::<Vec<_>>()).prop_shuffle();
            (Just(n), order)
        })
        .prop_flat_map(|(n, order)| {
            let pairs = forward_pairs(&order);
            let len = pairs.len();
            (Just(n), proptest::sample::subsequence(pairs, 0..=len))
        })
        .prop_flat_map(|(n, edges)| {
            let names: Vec<String> = (0..n).map(|i| format!("Agent{i}")).collect();
            let agents: Vec<_> = (0..n)
                .map(|i| {
                    let preds: Vec<String> = edges.iter().filter(|e| e.1 == i).map(|e| names[e.0].clone()).collect();
                    arb_agent(names[i].clone(), preds)
                })
                .collect();
            (text(), Just(edges), agents)
        })
        .prop_map(|(task, edges, agents)| {
            let mut lan = Lan::new(task, "input", "output");
            lan.agents = agents;
            for (s, t) in edges {
                let (s, t) = (lan.agents[s].name.clone(), lan.agents[t].name.clone());
                lan.add_edge(&s, &t);
            }
            lan
        })
}

fn arb_agent(name: String, preds: Vec<String>) -> impl Strategy<Value = Agent> {
    let required = proptest::sample::subsequence(preds.clone(), 0..=preds.len());
    let mut sources = preds.clone();
    sources.sort();
    (
        text(),
        text(),
        any::<bool>(),
        required,
        proptest::collection::vec(text(), 0..3),
        proptest::collection::vec(text(), 0..3),
        proptest::collection::vec(arb_example(true, sources.clone()), 0..3),
        proptest::collection::vec(arb_example(false, sources), 0..3),
    )
        .prop_map(move |(sub, out, enabled, required, cmk, emk, cme, eme)| {
            let mut a = Agent::new(name.clone(), sub, out);
            a.control.enabled = enabled;
            a.control.required_predecessors = required;
            a.control.knowledge = cmk.iter().map(|t| knowledge(t)).collect();
            a.execution.knowledge = emk.iter().map(|t| knowledge(t)).collect();
            a.control.examples = cme;
            a.execution.examples = eme;
            a
        })
}

/// Names and edges only, possibly cyclic, for order and validation oracles.
pub fn arb_graph(max_agents: usize) -> impl Strategy<Value = Lan> {
    (1..=max_agents)
        .prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).collect();
            let len = pairs.len();
            (Just(n), proptest::sample::subsequence(pairs, 0..=len.min(3 * n)))
        })
        .prop_map(|(n, edges)| {
            let mut lan = Lan::new("t", "i", "o");
            for i in 0..n {
                lan.agents.push(Agent::new(format!("N{i}"), "s", "o"));
            }
            for (s, t) in edges {
                lan.add_edge(&format!("N{s}"), &format!("N{t}"));
            }
            lan
        })
}

/// Every permutation of `0..n`, in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Brute force: the lexicographically first (by insertion index) ordering
/// that respects every edge, or `None` if no ordering does.
pub fn brute_force_order(lan: &Lan) -> Option<Vec<String>> {
    let n = lan.agents.len();
    let idx = |name: &str| lan.agents.iter().position(|a| a.name == name).unwrap();
    let edges: Vec<(usize, usize)> = lan.edges.iter().map(|e| (idx(&e.source), idx(&e.target))).collect();
    permutations(n)
        .into_iter()
        .find(|p| {
            let mut pos = vec![0; n];
            for (k, &i) in p.iter().enumerate() {
                pos[i] = k;
            }
            edges.iter().all(|&(s, t)| pos[s] < pos[t])
        })
        .map(|p| p.into_iter().map(|i| lan.agents[i].name.clone()).collect())
}
