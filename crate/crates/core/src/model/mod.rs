//! The network data model: agents, modules, examples, validation, the
//! document format and edit-script diffs.

mod diff;
mod document;
mod lan;
mod validate;

pub use diff::{apply_edit_script, lan_edit_script, lmd, script_cost, ApplyError, EditAction, EditOp, LanField};
pub use document::{
    canonicalize, deserialize_lan, from_value, serialize_lan, to_value, DocumentError, Location,
    DOCUMENT_VERSION,
};
pub use lan::{
    Agent, ControlModule, Edge, Example, ExampleResult, ExecutionModule, KnowledgeItem,
    KnowledgeOrigin, Lan, ModuleKind, NamedValue, NamedValues, BLANK_OUTPUT, BLANK_SUBTASK,
    EXTERNAL_INPUT,
};
pub use validate::{
    structural_issues, topological_order, validate_lan, AgentField, CycleError, StructureIssue,
    Violation,
};
