use lanforge_core::update::{
    route_agent_cause, route_cause, AgentCauseType, CauseReport, CauseType, NextStep, Strategy,
};

#[test]
fn every_cause_routes_as_specified() {
    for t in CauseType::ALL {
        let cause = CauseReport {
            reason_type: t,
            agent_name: (t != CauseType::MissingAgent).then(|| "RhymingPolisher".to_string()),
            reason_content: "why".into(),
        };
        let next = route_cause(&cause);
        match t {
            CauseType::MissingAgent => {
                let NextStep::Params(s) = next else { panic!("missing_agent skips the agent step") };
                assert_eq!((s.strategy, s.target, s.activate), (Strategy::AddAgent, None, None));
            }
            CauseType::WronglyActivated => {
                let NextStep::Params(s) = next else { panic!("wrongly_activated skips the agent step") };
                assert_eq!(s.strategy, Strategy::AddCmKnowledge);
                assert_eq!(s.target.as_deref(), Some("RhymingPolisher"));
                assert_eq!(s.activate, Some(false));
            }
            CauseType::PoorPerformance => assert_eq!(next, NextStep::AgentCause),
        }
    }
}

#[test]
fn every_agent_cause_routes_as_specified() {
    for t in AgentCauseType::ALL {
        let s = route_agent_cause("LiteralTranslator", t);
        assert_eq!(s.target.as_deref(), Some("LiteralTranslator"));
        let expected = match t {
            AgentCauseType::NotActivated => (Strategy::AddCmKnowledge, Some(true)),
            AgentCauseType::LacksKnowledge => (Strategy::AddEmKnowledge, None),
            AgentCauseType::NeedsSplit => (Strategy::SplitAgent, None),
            AgentCauseType::NeedsInputs => (Strategy::AddInputs, None),
        };
        assert_eq!((s.strategy, s.activate), expected);
    }
}

#[test]
fn labels_round_trip() {
    for t in CauseType::ALL {
        assert_eq!(CauseType::parse_label(t.as_str()), Some(t));
    }
    for t in AgentCauseType::ALL {
        assert_eq!(AgentCauseType::parse_label(t.as_str()), Some(t));
    }
}
