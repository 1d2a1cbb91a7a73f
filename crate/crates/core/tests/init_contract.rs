use lanforge_core::model::{topological_order, validate_lan};
use lanforge_core::update::{init_lan, InitError};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn init_yields_one_always_active_agent(task in "\\PC{0,80}", input in "\\PC{0,40}", output in "\\PC{0,40}") {
        match init_lan(&task, &input, &output) {
            Ok(lan) => {
                prop_assert!(!task.trim().is_empty());
                prop_assert_eq!(lan.agents.len(), 1);
                prop_assert!(lan.edges.is_empty());
                prop_assert!(!lan.agents[0].control.enabled);
                prop_assert_eq!(&lan.agents[0].execution.subtask_description, task.trim());
                prop_assert!(validate_lan(&lan).is_empty());
                prop_assert!(lanforge_core::model::structural_issues(&lan).is_empty());
                prop_assert_eq!(topological_order(&lan).unwrap().len(), 1);
            }
            Err(InitError::EmptyTask) => prop_assert!(task.trim().is_empty()),
        }
    }
}

#[test]
fn translation_task() {
    let lan = init_lan("Translate French to English", "French text", "English text").unwrap();
    assert_eq!(lan.agents.len(), 1);
    assert!(lan.edges.is_empty());
    assert!(!lan.agents[0].control.enabled);
    assert_eq!(init_lan("", "a", "b"), Err(InitError::EmptyTask));
}
