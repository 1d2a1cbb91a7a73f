//! User intervention on a paused step: edited results with `<???>`
//! placeholders, free-text hints, or both.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::steps::{
    ask_document, compute_step, interpret, step_prompt, step_schema, with_hint, Step, StepError,
    StepInputs, StepOutput,
};
use crate::gateway::Gateway;

pub const PLACEHOLDER: &str = "<???>";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edited_document: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint_text: Option<String>,
}

impl Intervention {
    pub fn hint(text: impl Into<String>) -> Self {
        Self {
            edited_document: None,
            hint_text: Some(text.into()),
        }
    }

    pub fn edit(doc: Value) -> Self {
        Self {
            edited_document: Some(doc),
            hint_text: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.edited_document.is_none()
            && self.hint_text.as_deref().is_none_or(|h| h.trim().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MergeError {
    #[error("the edited document must be a JSON object")]
    NotAnObject,
    #[error("field `{field}` is not part of this step's template (allowed: {})", .allowed.join(", "))]
    UnknownField { field: String, allowed: Vec<String> },
    #[error("the {0:?} step has no editable result")]
    NoTemplate(Step),
}

#[derive(Debug, thiserror::Error)]
pub enum InterventionError {
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error("{error}")]
    Step {
        error: StepError,
        /// The document that failed validation, when one was produced.
        document: Option<Value>,
    },
}

pub fn contains_placeholder(value: &Value) -> bool {
    match value {
        Value::String(s) => s.contains(PLACEHOLDER),
        Value::Array(a) => a.iter().any(contains_placeholder),
        Value::Object(m) => m.values().any(contains_placeholder),
        _ => false,
    }
}

fn deep_merge(base: &mut Map<String, Value>, edit: &Map<String, Value>) {
    for (k, v) in edit {
        match (base.get_mut(k), v) {
            (Some(Value::Object(b)), Value::Object(e)) => deep_merge(b, e),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

/// Merges `edit` over `base`. Only top-level fields named in `allowed` may be edited.
pub fn merge_document(
    base: &Map<String, Value>,
    edit: &Value,
    allowed: &[String],
) -> Result<Map<String, Value>, MergeError> {
    let Value::Object(edit) = edit else {
        return Err(MergeError::NotAnObject);
    };
    if let Some(field) = edit.keys().find(|k| !allowed.contains(k)) {
        return Err(MergeError::UnknownField {
            field: field.clone(),
            allowed: allowed.to_vec(),
        });
    }
    let mut out = base.clone();
    deep_merge(&mut out, edit);
    Ok(out)
}

/// Copies every placeholder-free value of `user` onto `completed`, so that
/// completion only ever fills in placeholders.
fn overlay_user_values(completed: &mut Map<String, Value>, user: &Map<String, Value>) {
    for (k, v) in user {
        if !contains_placeholder(v) {
            completed.insert(k.clone(), v.clone());
        } else if let (Some(Value::Object(c)), Value::Object(u)) = (completed.get_mut(k), v) {
            overlay_user_values(c, u);
        }
    }
}

pub fn completion_prompt(step_prompt: &str, partial: &Map<String, Value>) -> String {
    format!(
        "{step_prompt}\n# Partially completed answer\n\
Some values in the answer below contain the placeholder {PLACEHOLDER}. Replace every placeholder with \
a suitable value and keep all other values exactly as they are. Reply with only the completed JSON object.\n{}\n",
        serde_json::to_string_pretty(&Value::Object(partial.clone())).expect("document serializes")
    )
}

/// Recomputes a paused step under `intervention`. A hint is applied first
/// (re-running the step with a guidance section), then the edited document
/// is merged over the result and any placeholders are completed by the model.
pub fn apply_intervention(
    step: Step,
    inputs: &StepInputs,
    current: Option<&Value>,
    intervention: &Intervention,
    gateway: &Gateway,
    budget: u32,
) -> Result<StepOutput, InterventionError> {
    if step.number().is_none() {
        return Err(MergeError::NoTemplate(step).into());
    }
    let hint = intervention.hint_text.as_deref().filter(|h| !h.trim().is_empty());
    let Some(edited) = &intervention.edited_document else {
        return compute_step(step, inputs, gateway, budget, hint)
            .map_err(|(error, document)| InterventionError::Step { error, document });
    };
    let step_err = |error: StepError| InterventionError::Step { error, document: None };
    let schema = step_schema(step, inputs.results).map_err(step_err)?;
    let allowed: Vec<String> = schema.fields.iter().map(|f| f.name.clone()).collect();
    if !edited.is_object() {
        return Err(MergeError::NotAnObject.into());
    }

    let mut calls = Vec::new();
    let base = match hint {
        Some(_) => match compute_step(step, inputs, gateway, budget, hint) {
            Ok(out) => {
                calls.extend(out.calls);
                out.document
            }
            Err((_, Some(doc))) => doc,
            Err((error, None)) => return Err(InterventionError::Step { error, document: None }),
        },
        None => current.cloned().unwrap_or_else(|| Value::Object(Map::new())),
    };
    let base = base.as_object().cloned().unwrap_or_default();
    let merged = merge_document(&base, edited, &allowed)?;

    let document = if contains_placeholder(&Value::Object(merged.clone())) {
        let prompt = with_hint(step_prompt(step, inputs).map_err(step_err)?, hint);
        let prompt = completion_prompt(&prompt, &merged);
        let tag = format!("complete:{}", step.tag());
        let (mut completed, completion_calls) =
            ask_document(gateway, &prompt, &tag, &schema, budget).map_err(step_err)?;
        calls.extend(completion_calls);
        overlay_user_values(&mut completed, &merged);
        completed
    } else {
        merged
    };
    match interpret(step, &document, inputs) {
        Ok(value) => Ok(StepOutput {
            document: value.document(),
            value,
            calls,
        }),
        Err(error) => Err(InterventionError::Step {
            error,
            document: Some(Value::Object(document)),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn obj(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn unknown_top_level_field_is_refused() {
        let allowed = vec!["gap".to_string()];
        let err = merge_document(&Map::new(), &json!({"gpa": "x"}), &allowed).unwrap_err();
        assert!(matches!(err, MergeError::UnknownField { ref field, .. } if field == "gpa"));
    }

    #[test]
    fn nested_objects_merge_deeply() {
        let allowed = vec!["parameters".to_string()];
        let base = obj(json!({"parameters": {"agent_name": "A", "knowledge": "old"}}));
        let merged = merge_document(&base, &json!({"parameters": {"knowledge": "new"}}), &allowed).unwrap();
        assert_eq!(Value::Object(merged), json!({"parameters": {"agent_name": "A", "knowledge": "new"}}));
    }

    #[test]
    fn placeholders_are_found_inside_text() {
        assert!(contains_placeholder(&json!({"a": ["x <???> y"]})));
        assert!(!contains_placeholder(&json!({"a": "x"})));
    }

    #[test]
    fn user_values_win_over_completion() {
        let mut completed = obj(json!({"reason_type": "poor_performance", "reason_content": "filled"}));
        let user = obj(json!({"reason_type": "missing_agent", "reason_content": "<???>"}));
        overlay_user_values(&mut completed, &user);
        assert_eq!(Value::Object(completed), json!({"reason_type": "missing_agent", "reason_content": "filled"}));
    }
}
