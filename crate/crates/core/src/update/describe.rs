//! Text descriptions of a network and of single agents for the update prompts.

use std::fmt::Write;

use crate::model::{Agent, Lan};
use crate::runtime::prompt::{display_label, render_examples, render_knowledge};
use crate::runtime::RunTrace;

fn quoted(text: &str) -> String {
    serde_json::to_string(text).expect("string serializes")
}

/// Agents, the data flow of the last execution and the network's input and output.
pub fn render_lan_description(lan: &Lan, trace: &RunTrace) -> String {
    let mut out = String::new();
    out.push_str("# LAN description\n");
    let _ = writeln!(out, "Task: {}", lan.task_description);
    let _ = writeln!(out, "LAN input: {}", lan.input_description);
    let _ = writeln!(out, "LAN output: {}", lan.output_description);

    out.push_str("\n## Agents\n");
    for (i, a) in lan.agents.iter().enumerate() {
        let _ = writeln!(out, "{}. {}: {}", i + 1, a.name, a.execution.subtask_description);
    }

    out.push_str("\n## Data flow in the last execution\n");
    for r in &trace.records {
        for e in r.inputs.iter() {
            let _ = writeln!(
                out,
                "- {} -> {}: {}",
                display_label(&e.source),
                r.agent,
                quoted(&e.value)
            );
        }
        if !r.activated {
            let _ = writeln!(out, "  ({} was not activated and forwarded its inputs unchanged)", r.agent);
        }
    }

    out.push_str("\n## Last execution\n");
    let _ = writeln!(out, "Input: {}", trace.external_input);
    let _ = writeln!(out, "Output: {}", trace.final_output);
    out
}

/// Everything known about one agent, including its behaviour in the last execution.
pub fn render_agent_description(agent: &Agent, trace: &RunTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Agent description\nName: {}", agent.name);
    let _ = writeln!(out, "Subtask: {}", agent.execution.subtask_description);
    let _ = writeln!(out, "Output: {}", agent.execution.output_description);

    out.push_str("\n## Control module\n");
    if agent.control.enabled {
        out.push_str("Decides on each input whether the agent runs.\n");
    } else {
        out.push_str("Disabled: the agent runs on every input.\n");
    }
    if !agent.control.required_predecessors.is_empty() {
        let _ = writeln!(
            out,
            "Runs only if these agents ran: {}",
            agent.control.required_predecessors.join(", ")
        );
    }
    module_section(&render_knowledge(&agent.control.knowledge), &render_examples(&agent.control.examples), &mut out);

    out.push_str("\n## Execution module\n");
    module_section(
        &render_knowledge(&agent.execution.knowledge),
        &render_examples(&agent.execution.examples),
        &mut out,
    );

    out.push_str("\n## Last execution\n");
    match trace.record(&agent.name) {
        None => out.push_str("The agent did not take part in the last execution.\n"),
        Some(r) => {
            out.push_str("Inputs:\n");
            for e in r.inputs.iter() {
                let _ = writeln!(out, "- (from {}) {}", display_label(&e.source), e.value);
            }
            if let Some(t) = &r.cm_thought {
                let _ = writeln!(out, "Control module reasoning: {t}");
            }
            let _ = writeln!(out, "Activated: {}", r.activated);
            if let Some(t) = &r.em_thought {
                let _ = writeln!(out, "Execution module reasoning: {t}");
            }
            match r.own_output() {
                Some(o) => {
                    let _ = writeln!(out, "Output: {o}");
                }
                None => out.push_str("Output: none (inputs forwarded unchanged)\n"),
            }
        }
    }
    out
}

fn module_section(knowledge: &str, examples: &str, out: &mut String) {
    if knowledge.is_empty() {
        out.push_str("Knowledge: none\n");
    } else {
        out.push_str("Knowledge:\n");
        out.push_str(knowledge);
    }
    if examples.is_empty() {
        out.push_str("Examples: none\n");
    } else {
        out.push_str("Examples:\n");
        out.push_str(examples);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NamedValues;
    use crate::runtime::AgentRunRecord;

    #[test]
    fn single_agent_flow_lists_only_external_input() {
        let lan = Lan::new("Translate", "French", "English")
            .with_agent(Agent::new("Translator", "Translate", "English text").always_active());
        let mut output = NamedValues::external("bonjour");
        output.insert("Translator", "hello");
        let trace = RunTrace {
            lan_snapshot: lan.clone(),
            external_input: "bonjour".into(),
            records: vec![AgentRunRecord {
                agent: "Translator".into(),
                inputs: NamedValues::external("bonjour"),
                cm_prompt: None,
                cm_thought: None,
                activated: true,
                em_prompt: None,
                em_thought: None,
                output,
                calls: vec![],
            }],
            final_output: "hello".into(),
        };
        let d = render_lan_description(&lan, &trace);
        let flow = d.split("## Data flow in the last execution\n").nth(1).unwrap();
        let lines: Vec<_> = flow.lines().take_while(|l| !l.is_empty()).collect();
        assert_eq!(lines, vec!["- LAN input -> Translator: \"bonjour\""]);
    }
}
