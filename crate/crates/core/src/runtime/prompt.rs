//! Prompt assembly for the control and execution modules.
//!
//! Both prompts have the same five parts: the task, the agent's inputs,
//! knowledge and examples (each omitted when empty), a step-by-step cue and
//! the JSON answer template.

use std::fmt::Write;

use super::repair::{FieldKind, ResponseSchema};
use crate::model::{Agent, Example, KnowledgeItem, Lan, NamedValues, EXTERNAL_INPUT};

pub const STEP_BY_STEP: &str = "Let's think step by step.";
/// How the external input is labelled in rendered prompts.
pub const EXTERNAL_LABEL: &str = "LAN input";

pub fn display_label(source: &str) -> &str {
    if source == EXTERNAL_INPUT {
        EXTERNAL_LABEL
    } else {
        source
    }
}

/// `(from <source>) <value>` lines, one entry per line group.
pub fn render_values(values: &NamedValues) -> String {
    let mut out = String::new();
    for e in values.iter() {
        let _ = writeln!(out, "(from {}) {}", display_label(&e.source), e.value);
    }
    out
}

pub fn render_knowledge(items: &[KnowledgeItem]) -> String {
    let mut out = String::new();
    for (i, k) in items.iter().enumerate() {
        let _ = writeln!(out, "{}. {}", i + 1, k.text);
    }
    out
}

pub fn render_examples(examples: &[Example]) -> String {
    let mut out = String::new();
    for (i, ex) in examples.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "## Example {}", i + 1);
        out.push_str("Inputs:\n");
        out.push_str(&render_values(&ex.inputs));
        let _ = writeln!(out, "Result: {}", ex.result.render());
    }
    out
}

fn inputs_section(lan: &Lan, inputs: &NamedValues, out: &mut String) {
    out.push_str("# Inputs\n");
    out.push_str(&render_values(inputs));
    out.push_str("\nWhere the inputs come from:\n");
    for e in inputs.iter() {
        if e.source == EXTERNAL_INPUT {
            let _ = writeln!(out, "- {EXTERNAL_LABEL}: {}", lan.input_description);
        } else {
            let subtask = lan
                .agent(&e.source)
                .map(|a| a.execution.subtask_description.as_str())
                .unwrap_or("(agent no longer in the network)");
            let _ = writeln!(out, "- {}: output of the agent whose subtask is: {subtask}", e.source);
        }
    }
}

fn knowledge_and_examples(knowledge: &[KnowledgeItem], examples: &[Example], out: &mut String) {
    if !knowledge.is_empty() {
        out.push_str("\n# Knowledge\n");
        out.push_str(&render_knowledge(knowledge));
    }
    if !examples.is_empty() {
        out.push_str("\n# Examples\n");
        out.push_str(&render_examples(examples));
    }
}

fn answer_section(schema: &ResponseSchema, out: &mut String) {
    out.push('\n');
    out.push_str(STEP_BY_STEP);
    out.push_str("\n\n# Answer format\nReply with only a JSON object in this form:\n");
    out.push_str(&schema.render());
    out.push('\n');
}

pub fn cm_schema() -> ResponseSchema {
    ResponseSchema::new()
        .field("thought", FieldKind::Text, "\"<your reasoning>\"")
        .field("result", FieldKind::Bool, "<true or false>")
}

pub fn em_schema(agent: &Agent) -> ResponseSchema {
    ResponseSchema::new()
        .field("thought", FieldKind::Text, "\"<your reasoning>\"")
        .field(
            "result",
            FieldKind::Text,
            format!("\"<{}>\"", agent.execution.output_description),
        )
}

/// Prompt asking whether `agent` should run on `inputs`.
pub fn build_cm_prompt(lan: &Lan, agent: &Agent, inputs: &NamedValues) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# Task\nYou are the control module of the agent \"{}\" in a network of LLM agents that together perform this task: {}",
        agent.name, lan.task_description
    );
    let _ = writeln!(out, "The agent's subtask: {}", agent.execution.subtask_description);
    out.push_str(
        "Decide whether the agent should be activated for the inputs below. \
         An agent that is not activated forwards its inputs unchanged.\n\n",
    );
    inputs_section(lan, inputs, &mut out);
    knowledge_and_examples(&agent.control.knowledge, &agent.control.examples, &mut out);
    answer_section(&cm_schema(), &mut out);
    out
}

/// Prompt asking `agent` to compute its output from `inputs`.
pub fn build_em_prompt(lan: &Lan, agent: &Agent, inputs: &NamedValues) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# Task\nYou are the agent \"{}\" in a network of LLM agents that together perform this task: {}",
        agent.name, lan.task_description
    );
    let _ = writeln!(out, "Your subtask: {}", agent.execution.subtask_description);
    let _ = writeln!(out, "Your output: {}\n", agent.execution.output_description);
    inputs_section(lan, inputs, &mut out);
    knowledge_and_examples(&agent.execution.knowledge, &agent.execution.examples, &mut out);
    answer_section(&em_schema(agent), &mut out);
    out
}
