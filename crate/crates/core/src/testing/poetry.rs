//! A small deterministic world for growing a poetry translation network.
//!
//! Texts carry tags such as `#rhyming` or `#spoken`. Module prompts are
//! answered from their inputs and knowledge by fixed rules, after consulting
//! the few-shot examples; diagnosis steps are answered from a table keyed by
//! the training example under repair. Seven training examples, in order,
//! each need exactly one update: a sequential split of the translator, a new
//! structure refiner, deactivation and activation knowledge, execution
//! knowledge, a parallel split and a new input edge.

use serde_json::{json, Value};

use super::{answer, prompt_inputs, ExampleOracle};
use crate::gateway::{CompletionRequest, Gateway, GatewayError};
use crate::model::{Agent, Lan, NamedValues, EXTERNAL_INPUT};
use crate::update::{
    train_example, AutoConfirm, FixedClock, PipelineError, SupervisionPolicy, TrainingExample,
    TrainingOutcome, UpdateEngine, Workspace,
};

pub const TASK: &str = "Translate French poetry into English";

/// The starting network: a single always-active translator.
pub fn initial_lan() -> Lan {
    Lan::new(TASK, "A French poem or text, with tags describing its form", "An English translation")
        .with_agent(
            Agent::new("Translator", "Translate the French text into English", "An English translation")
                .always_active(),
        )
}

fn en(text: &str) -> String {
    format!("EN[{text}]")
}

struct Case {
    id: &'static str,
    input: &'static str,
    ground_truth: fn(&str) -> String,
    gap: &'static str,
    cause: fn() -> Value,
    agent_cause: Option<fn() -> Value>,
    parameters: fn() -> Value,
}

const CASES: &[Case] = &[
    Case {
        id: "ex1",
        input: "#rhyming Le ciel est bleu, le vent est doux",
        ground_truth: |x| format!("rhymed({})", en(x)),
        gap: "The translation does not preserve the rhyming scheme of the original poem.",
        cause: || json!({"reason_type": "poor_performance", "agent_name": "Translator", "reason_content": "One agent both translates and rhymes, and the rhyme is lost."}),
        agent_cause: Some(|| json!({"reason_type": "needs_split", "reason_content": "Translating and rhyming are two steps; translate first and then convert to rhyme."})),
        parameters: || json!({
            "agent_name": "Translator",
            "mode": "sequential",
            "agents": [
                {"name": "LiteralTranslator", "subtask_description": "Translate the French text literally into English", "output_description": "A literal English translation", "cm_enabled": false},
                {"name": "RhymingPolisher", "subtask_description": "Rewrite the literal translation so that it rhymes like the original", "output_description": "A rhyming English translation", "cm_enabled": true, "cm_knowledge": ["Activate only when the original poem rhymes."]}
            ]
        }),
    },
    Case {
        id: "ex2",
        input: "#stanzas Il pleut sur la ville / comme il pleut dans mon coeur",
        ground_truth: |x| format!("structured({})", en(x)),
        gap: "The translation ignores the stanza layout of the original.",
        cause: || json!({"reason_type": "missing_agent", "reason_content": "No agent is responsible for reproducing the structure of the poem."}),
        agent_cause: None,
        parameters: || json!({
            "agent": {"name": "StructureRefiner", "subtask_description": "Lay out the translation in the stanzas of the original poem", "output_description": "The translation arranged in the original's stanzas", "cm_knowledge": ["Activate when the original is written in stanzas."]},
            "predecessors": ["LiteralTranslator"],
            "successors": []
        }),
    },
    Case {
        id: "ex3",
        input: "#rhyming #dialogue Bonjour, dit-il, quel beau jour",
        ground_truth: |x| en(x),
        gap: "A line of dialogue was forced into rhyme.",
        cause: || json!({"reason_type": "wrongly_activated", "agent_name": "RhymingPolisher", "reason_content": "The polisher rhymed a spoken exchange that should stay literal."}),
        agent_cause: None,
        parameters: || json!({"agent_name": "RhymingPolisher", "knowledge": "Do not activate for dialogue: spoken exchanges must not be forced into rhyme."}),
    },
    Case {
        id: "ex4",
        input: "#couplets Deux vers qui vont ensemble",
        ground_truth: |x| format!("structured({})", en(x)),
        gap: "The couplet layout of the original is lost.",
        cause: || json!({"reason_type": "poor_performance", "agent_name": "StructureRefiner", "reason_content": "The structure refiner exists but did not handle the couplets."}),
        agent_cause: Some(|| json!({"reason_type": "not_activated", "reason_content": "The refiner was not activated for a poem in couplets."})),
        parameters: || json!({"agent_name": "StructureRefiner", "knowledge": "Activate for couplets as well, since couplets need their line structure kept."}),
    },
    Case {
        id: "ex5",
        input: "#idiom Il pleut des cordes",
        ground_truth: |x| format!("EN-idiomatic[{x}]"),
        gap: "An idiom was translated word by word.",
        cause: || json!({"reason_type": "poor_performance", "agent_name": "LiteralTranslator", "reason_content": "The literal translator mistranslated an idiom."}),
        agent_cause: Some(|| json!({"reason_type": "lacks_knowledge", "reason_content": "The translator does not know to translate idioms by meaning."})),
        parameters: || json!({"agent_name": "LiteralTranslator", "knowledge": "Translate idioms by meaning rather than word by word."}),
    },
    Case {
        id: "ex6",
        input: "#spoken Salut, ça va ?",
        ground_truth: |x| format!("EN-spoken[{x}]"),
        gap: "Conversational French was rendered in a stiff literary register.",
        cause: || json!({"reason_type": "poor_performance", "agent_name": "LiteralTranslator", "reason_content": "One translator handles both spoken and literary text."}),
        agent_cause: Some(|| json!({"reason_type": "needs_split", "reason_content": "Spoken and literary texts need different translators."})),
        parameters: || json!({
            "agent_name": "LiteralTranslator",
            "mode": "parallel",
            "agents": [
                {"name": "SpokenTextTranslator", "subtask_description": "Translate spoken, conversational French into natural English", "output_description": "A colloquial English translation", "cm_knowledge": ["Activate for spoken text."]},
                {"name": "LiteraryTextTranslator", "subtask_description": "Translate literary French literally into English", "output_description": "A literal English translation", "cm_knowledge": ["Activate for literary text."], "em_knowledge": ["Translate idioms by meaning rather than word by word."]}
            ]
        }),
    },
    Case {
        id: "ex7",
        input: "#rhyming #stanzas Sous le pont Mirabeau coule la Seine",
        ground_truth: |x| format!("rhymed(structured({}))", en(x)),
        gap: "The rhymed version lost the stanza layout.",
        cause: || json!({"reason_type": "poor_performance", "agent_name": "RhymingPolisher", "reason_content": "The polisher works from the unstructured translation."}),
        agent_cause: Some(|| json!({"reason_type": "needs_inputs", "reason_content": "The polisher needs the structured translation as an input."})),
        parameters: || json!({"agent_name": "RhymingPolisher", "sources": ["StructureRefiner"]}),
    },
];

/// The seven training examples, in training order.
pub fn examples() -> Vec<TrainingExample> {
    CASES
        .iter()
        .map(|c| TrainingExample::new(c.id, c.input, (c.ground_truth)(c.input)))
        .collect()
}

fn section<'a>(prompt: &'a str, header: &str) -> Option<&'a str> {
    let start = prompt.find(header)? + header.len();
    let rest = &prompt[start..];
    let end = rest.find("\n#").map_or(rest.len(), |i| i);
    Some(&rest[..end])
}

fn knowledge_mentions(prompt: &str, word: &str) -> bool {
    section(prompt, "\n# Knowledge\n").is_some_and(|k| k.contains(word))
}

fn external(inputs: &NamedValues) -> &str {
    inputs.get(EXTERNAL_INPUT).unwrap_or_default()
}

fn translation(inputs: &NamedValues, agent: &str) -> String {
    if let Some(v) = inputs.get("StructureRefiner").filter(|_| agent != "StructureRefiner") {
        return v.to_string();
    }
    inputs
        .iter()
        .find(|e| e.source != EXTERNAL_INPUT && e.source != agent && e.source != "StructureRefiner")
        .map(|e| e.value.clone())
        .unwrap_or_else(|| en(external(inputs)))
}

fn activate(agent: &str, prompt: &str, inputs: &NamedValues) -> bool {
    let x = external(inputs);
    match agent {
        "RhymingPolisher" => x.contains("#rhyming") && !(x.contains("#dialogue") && knowledge_mentions(prompt, "dialogue")),
        "StructureRefiner" => x.contains("#stanzas") || (x.contains("#couplets") && knowledge_mentions(prompt, "couplets")),
        "SpokenTextTranslator" => x.contains("#spoken"),
        "LiteraryTextTranslator" => !x.contains("#spoken"),
        _ => true,
    }
}

fn execute(agent: &str, prompt: &str, inputs: &NamedValues) -> String {
    let x = external(inputs);
    match agent {
        "LiteralTranslator" | "LiteraryTextTranslator" if x.contains("#idiom") && knowledge_mentions(prompt, "idioms") => {
            format!("EN-idiomatic[{x}]")
        }
        "SpokenTextTranslator" => format!("EN-spoken[{x}]"),
        "RhymingPolisher" => format!("rhymed({})", translation(inputs, agent)),
        "StructureRefiner" => format!("structured({})", translation(inputs, agent)),
        _ => en(x),
    }
}

fn case_for(prompt: &str) -> Option<&'static Case> {
    let block = section(prompt, "\n# Training example\n")?;
    let input = block.lines().find_map(|l| l.strip_prefix("Input: "))?;
    CASES.iter().find(|c| c.input == input)
}

fn step_answer(step: &str, prompt: &str) -> Option<Value> {
    let case = case_for(prompt)?;
    Some(match step {
        "1" => json!({"gap": case.gap}),
        "2" => (case.cause)(),
        "3" => (case.agent_cause?)(),
        "4" => json!({"parameters": (case.parameters)()}),
        _ => return None,
    })
}

/// Rule-based answer for any request the scenario makes.
pub fn respond(request: &CompletionRequest) -> Result<String, GatewayError> {
    let tag = request.tag.as_str();
    let prompt = request.prompt.as_str();
    let unknown = || GatewayError::Provider {
        status: 400,
        message: format!("the poetry world cannot answer `{tag}`"),
    };
    if let Some(agent) = tag.strip_prefix("cm:") {
        let inputs = prompt_inputs(prompt).ok_or_else(unknown)?;
        return Ok(answer("decided by the form tags", activate(agent, prompt, &inputs)));
    }
    if let Some(agent) = tag.strip_prefix("em:") {
        let inputs = prompt_inputs(prompt).ok_or_else(unknown)?;
        return Ok(answer("applied the subtask", execute(agent, prompt, &inputs)));
    }
    if let Some(step) = tag.strip_prefix("step:").or_else(|| tag.strip_prefix("complete:step:")) {
        return step_answer(step, prompt).map(|v| v.to_string()).ok_or_else(unknown);
    }
    if tag.starts_with("select:") {
        let input = section(prompt, "\n# Input\n").unwrap_or_default();
        let choice = if input.contains("#spoken") { "SpokenTextTranslator" } else { "LiteraryTextTranslator" };
        return Ok(json!({"thought": "chosen by register", "agent_name": choice}).to_string());
    }
    if tag == "judge" {
        return Ok(json!({"thought": "the output differs from the ground truth", "result": false}).to_string());
    }
    Err(unknown())
}

/// The scenario backend: examples first, then the rules.
pub fn backend() -> ExampleOracle {
    ExampleOracle::new(respond)
}

/// Trains the initial network on every example in order, confirming each step.
pub fn train_all(gateway: &Gateway) -> Result<(Workspace, Vec<TrainingOutcome>), PipelineError> {
    let clock = FixedClock::epoch();
    let engine = UpdateEngine::new(gateway, &clock);
    let mut ws = Workspace::new(initial_lan());
    let mut outcomes = Vec::new();
    for ex in examples() {
        outcomes.push(train_example(&engine, &mut ws, ex, SupervisionPolicy::AutoConfirm, &mut AutoConfirm)?);
    }
    Ok((ws, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_truths_follow_the_rules() {
        let ex = examples();
        assert_eq!(ex.len(), 7);
        assert_eq!(ex[0].ground_truth, "rhymed(EN[#rhyming Le ciel est bleu, le vent est doux])");
        assert_eq!(ex[2].ground_truth, "EN[#rhyming #dialogue Bonjour, dit-il, quel beau jour]");
    }
}
