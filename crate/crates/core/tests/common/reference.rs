//! Reference interpreter for conditional DAG runs, written independently of
//! the runtime: an agent sees the external input and the result of every
//! activated strict ancestor, listed in execution order.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use lanforge_core::gateway::{FnBackend, Gateway};
use lanforge_core::model::{Agent, Lan, NamedValues, EXTERNAL_INPUT};
use lanforge_core::runtime::{Executor, RunTrace};
use lanforge_core::testing::answer;

use super::brute_force_order;

fn same<T: PartialEq + Debug>(got: &T, want: &T, ctx: &str) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{ctx}: got {got:?}, want {want:?}"))
    }
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub enum Gate {
    Disabled,
    Yes,
    No,
}

pub struct Expected {
    activated: Vec<bool>,
    asked: Vec<bool>,
    inputs: Vec<Vec<(String, String)>>,
    final_output: String,
    calls: usize,
}

fn output_of(name: &str) -> String {
    format!("out-{name}")
}

pub fn reference(lan: &Lan, gates: &[Gate], require_all: bool, external: &str) -> Expected {
    let n = lan.agents.len();
    let idx = |name: &str| lan.agents.iter().position(|a| a.name == name).unwrap();
    let mut reach = vec![vec![false; n]; n];
    for e in &lan.edges {
        reach[idx(&e.source)][idx(&e.target)] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    let order: Vec<usize> = brute_force_order(lan).unwrap().iter().map(|s| idx(s)).collect();
    let mut activated = vec![false; n];
    let mut asked = vec![false; n];
    let mut inputs = vec![Vec::new(); n];
    let mut calls = 0;
    for &i in &order {
        let mut seen = vec![(EXTERNAL_INPUT.to_string(), external.to_string())];
        for &j in &order {
            if reach[j][i] && activated[j] {
                seen.push((lan.agents[j].name.clone(), output_of(&lan.agents[j].name)));
            }
        }
        inputs[i] = seen;
        let direct_preds: Vec<usize> = lan.edges.iter().filter(|e| idx(&e.target) == i).map(|e| idx(&e.source)).collect();
        activated[i] = match gates[i] {
            Gate::Disabled => true,
            _ if require_all && direct_preds.iter().any(|&p| !activated[p]) => false,
            g => {
                asked[i] = true;
                calls += 1;
                g == Gate::Yes
            }
        };
        if activated[i] {
            calls += 1;
        }
    }
    let final_output = order
        .iter()
        .rev()
        .find(|&&i| activated[i])
        .map_or(external.to_string(), |&i| output_of(&lan.agents[i].name));
    Expected { activated, asked, inputs, final_output, calls }
}

pub fn build(n: usize, mask: u32, gates: &[Gate], require_all: bool) -> Lan {
    let mut lan = Lan::new("task", "input", "output");
    for (i, gate) in gates.iter().enumerate().take(n) {
        let mut a = Agent::new(format!("A{i}"), format!("subtask {i}"), format!("output {i}"));
        a.control.enabled = *gate != Gate::Disabled;
        lan.agents.push(a);
    }
    let mut bit = 0;
    for s in 0..n {
        for t in 0..n {
            if s != t {
                if mask & (1 << bit) != 0 {
                    lan.add_edge(&format!("A{s}"), &format!("A{t}"));
                }
                bit += 1;
            }
        }
    }
    if require_all {
        let preds: Vec<Vec<String>> = (0..n)
            .map(|i| lan.predecessors(&format!("A{i}")).into_iter().map(String::from).collect())
            .collect();
        for (a, p) in lan.agents.iter_mut().zip(preds) {
            if a.control.enabled {
                a.control.required_predecessors = p;
            }
        }
    }
    lan
}

pub fn run(lan: &Lan, gates: &[Gate]) -> (RunTrace, usize) {
    let decisions: BTreeMap<String, bool> = lan
        .agents
        .iter()
        .zip(gates)
        .map(|(a, g)| (a.name.clone(), *g == Gate::Yes))
        .collect();
    let backend = FnBackend::new("pattern", move |req| {
        if let Some(name) = req.tag.strip_prefix("cm:") {
            Ok(answer("pattern", decisions[name]))
        } else {
            let name = req.tag.strip_prefix("em:").unwrap();
            Ok(answer("work", output_of(name)))
        }
    });
    let gw = Gateway::new(Arc::new(backend));
    let trace = Executor::new(&gw).run_lan(lan, "ext").unwrap();
    (trace, gw.call_count())
}

/// Checks every acyclic graph among `masks` against the reference; returns
/// the number of (graph, gates, requirement) cases compared.
pub fn check(n: usize, masks: std::ops::Range<u32>) -> Result<usize, String> {
    let mut checked = 0;
    let pairs = (n * (n - 1)) as u32;
    for mask in masks.filter(|m| *m < (1 << pairs)) {
        let probe = build(n, mask, &vec![Gate::Yes; n], false);
        if brute_force_order(&probe).is_none() {
            continue;
        }
        for code in 0..3usize.pow(n as u32) {
            let gates: Vec<Gate> = (0..n)
                .map(|i| [Gate::Disabled, Gate::Yes, Gate::No][(code / 3usize.pow(i as u32)) % 3])
                .collect();
            for require_all in [false, true] {
                let lan = build(n, mask, &gates, require_all);
                let exp = reference(&lan, &gates, require_all, "ext");
                let (trace, calls) = run(&lan, &gates);
                let ctx = format!("n={n} mask={mask:#b} gates={gates:?} require_all={require_all}");
                same(&trace.final_output, &exp.final_output, &ctx)?;
                same(&calls, &exp.calls, &ctx)?;
                same(&trace.llm_call_count(), &calls, &ctx)?;
                for r in &trace.records {
                    let i: usize = r.agent[1..].parse().unwrap();
                    same(&r.activated, &exp.activated[i], &format!("{ctx} activation of {}", r.agent))?;
                    same(&r.cm_prompt.is_some(), &exp.asked[i], &format!("{ctx} gate of {}", r.agent))?;
                    let got: Vec<(String, String)> = r.inputs.iter().map(|e| (e.source.clone(), e.value.clone())).collect();
                    same(&got, &exp.inputs[i], &format!("{ctx} inputs of {}", r.agent))?;
                    let mut expected_output: NamedValues = r.inputs.clone();
                    if r.activated {
                        expected_output.insert(r.agent.clone(), output_of(&r.agent));
                    }
                    same(&r.output, &expected_output, &format!("{ctx} pass-through of {}", r.agent))?;
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

