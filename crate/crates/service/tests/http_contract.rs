mod common;

use std::sync::Arc;

use axum::http::{Method, StatusCode};
use serde_json::{json, Value};

use common::{factory, news_world, open, NEWS_TASK};
use lanforge_core::gateway::Gateway;
use lanforge_core::model::{deserialize_lan, from_value, to_value, Lan};
use lanforge_core::testing::poetry;
use lanforge_service::session::SessionEvent;
use lanforge_service::Fault;

fn lan_of(body: &Value) -> Lan {
    from_value(body["lan"].clone()).unwrap()
}

#[tokio::test]
async fn each_save_rule_yields_422() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), factory(news_world));
    let id = app.session(NEWS_TASK).await;
    let (_, body) = app.get(&format!("/sessions/{id}/lan")).await;
    let base = lan_of(&body);
    let first = base.agents[0].name.clone();

    let mut cyclic = base.clone().with_agent(lanforge_core::Agent::new("B", "b", "b"));
    cyclic.add_edge(&first, "B");
    cyclic.add_edge("B", &first);
    let mut empty = base.clone();
    empty.agents[0].execution.output_description = "  ".into();
    let duplicate = base.clone().with_agent(base.agents[0].clone());

    for (lan, kind) in [(cyclic, "CycleViolation"), (empty, "EmptyField"), (duplicate, "DuplicateName")] {
        let (status, body) = app.put(&format!("/sessions/{id}/lan"), json!({"lan": to_value(&lan)})).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
        assert_eq!(body["code"], "lan_invalid");
        assert_eq!(body["api_version"], 1);
        assert_eq!(body["violations"][0]["kind"], kind, "{body}");
    }

    // the same rules guard the fine-grained edits
    let (s, _) = app.post(&format!("/sessions/{id}/lan/agents"), json!({"name": "B"})).await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, _) = app.post(&format!("/sessions/{id}/lan/edges"), json!({"source": first, "target": "B"})).await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, body) = app.post(&format!("/sessions/{id}/lan/edges"), json!({"source": "B", "target": first})).await;
    assert_eq!((s, body["violations"][0]["kind"].clone()), (StatusCode::UNPROCESSABLE_ENTITY, json!("CycleViolation")));
    let (s, body) = app
        .call(Method::PATCH, &format!("/sessions/{id}/lan/agents/B"), Some(json!({"name": first})))
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["violations"].as_array().unwrap().iter().any(|v| v["kind"] == "DuplicateName"), "{body}");
    let (s, body) = app
        .call(Method::PATCH, &format!("/sessions/{id}/lan/agents/B"), Some(json!({"subtask_description": ""})))
        .await;
    assert_eq!((s, body["violations"][0]["kind"].clone()), (StatusCode::UNPROCESSABLE_ENTITY, json!("EmptyField")));
    assert_eq!(app.revision_count(&id).await, 3);
}

#[tokio::test]
async fn malformed_documents_and_versions_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), factory(news_world));
    let id = app.session(NEWS_TASK).await;
    let mut doc = to_value(&poetry::initial_lan());
    doc["edges"] = json!([["Translator", "Ghost"]]);
    let (s, body) = app.put(&format!("/sessions/{id}/lan"), json!({"lan": doc})).await;
    assert_eq!((s, body["code"].clone()), (StatusCode::UNPROCESSABLE_ENTITY, json!("lan_malformed")));
    let (s, body) = app.put(&format!("/sessions/{id}/lan"), json!({"lan": {"agents": []}})).await;
    assert_eq!((s, body["code"].clone()), (StatusCode::BAD_REQUEST, json!("bad_document")));
    let (s, body) = app.post(&format!("/sessions/{id}/run"), json!({"api_version": 2, "input": "x"})).await;
    assert_eq!((s, body["code"].clone()), (StatusCode::BAD_REQUEST, json!("unsupported_api_version")));
    let (s, _) = app.get("/sessions/nope/lan").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(app.revision_count(&id).await, 1);
}

#[tokio::test]
async fn deleting_an_agent_removes_its_edges() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), factory(news_world));
    let id = app.session(NEWS_TASK).await;
    let mut lan = Lan::new("t", "i", "o");
    for n in ["A", "B", "C"] {
        lan = lan.with_agent(lanforge_core::Agent::new(n, n, n));
    }
    lan = lan.with_edge("A", "B").with_edge("B", "C");
    let (s, _) = app.put(&format!("/sessions/{id}/lan"), json!({"lan": to_value(&lan)})).await;
    assert_eq!(s, StatusCode::OK);
    let (s, body) = app.call(Method::DELETE, &format!("/sessions/{id}/lan/agents/B"), None).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    let after = lan_of(&body["revision"]);
    assert_eq!(after.agents.len(), 2);
    assert!(after.edges.is_empty());
    assert_eq!(body["revision"]["cause"], "manual_edit");
    // unchanged replacement adds nothing
    let (_, body) = app.put(&format!("/sessions/{id}/lan"), json!({"lan": to_value(&after)})).await;
    assert_eq!(body["changed"], false);
    assert_eq!(app.revision_count(&id).await, 3);
}

#[tokio::test]
async fn four_confirms_give_one_strategy_revision() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), factory(news_world));
    let id = app.session(NEWS_TASK).await;
    let (s, ex) = app
        .post(&format!("/sessions/{id}/examples"), json!({"input": "Markets fell.", "ground_truth": "checked summary"}))
        .await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, body) = app
        .post(&format!("/sessions/{id}/pipeline/start"), json!({"example_id": ex["id"], "policy": "interactive"}))
        .await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["state"]["current_step"], "gap");
    let mut steps = vec![];
    for _ in 0..4 {
        let (s, body) = app.post(&format!("/sessions/{id}/pipeline/confirm"), json!({})).await;
        assert_eq!(s, StatusCode::OK, "{body}");
        steps.push(body["state"]["current_step"].as_str().unwrap().to_string());
    }
    assert_eq!(steps, ["cause", "params", "apply", "done"]);
    let (_, body) = app.get(&format!("/sessions/{id}/pipeline")).await;
    assert_eq!(body["state"]["status"], "satisfied");
    let (_, revs) = app.get(&format!("/sessions/{id}/revisions")).await;
    let causes: Vec<&str> = revs["revisions"].as_array().unwrap().iter().map(|r| r["cause"].as_str().unwrap()).collect();
    assert_eq!(causes, ["init", "strategy"]);
    assert_eq!(revs["revisions"][1]["strategy"], "add_agent");
    assert_eq!(revs["revisions"][1]["parent"], 0);

    let (s, body) = app.post(&format!("/sessions/{id}/pipeline/confirm"), json!({})).await;
    assert_eq!((s, body["code"].clone()), (StatusCode::CONFLICT, json!("conflict")));
    let (_, body) = app.get(&format!("/sessions/{id}/revisions/1")).await;
    assert!(lan_of(&body).agent("Critic").is_some());
}

#[tokio::test]
async fn http_training_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), factory(poetry::backend));
    let id = app.session(poetry::TASK).await;
    let (s, _) = app.put(&format!("/sessions/{id}/lan"), json!({"lan": to_value(&poetry::initial_lan())})).await;
    assert_eq!(s, StatusCode::OK);
    for ex in poetry::examples() {
        let (s, _) = app.post(&format!("/sessions/{id}/examples"), serde_json::to_value(&ex).unwrap()).await;
        assert_eq!(s, StatusCode::CREATED);
    }
    for ex in poetry::examples() {
        let (s, body) = app
            .post(&format!("/sessions/{id}/pipeline/start"), json!({"example_id": ex.id, "policy": "auto_confirm"}))
            .await;
        assert_eq!(s, StatusCode::OK, "{body}");
        assert_eq!(body["state"]["status"], "satisfied", "{}", ex.id);
    }
    let (_, body) = app.get(&format!("/sessions/{id}/lan")).await;
    let gw = Gateway::new(Arc::new(poetry::backend()));
    let (ws, _) = poetry::train_all(&gw).unwrap();
    assert_eq!(lan_of(&body), ws.lan);
    let golden = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/poetry/golden_lan.json")).unwrap();
    assert_eq!(lan_of(&body), deserialize_lan(&golden).unwrap());
    assert_eq!(app.revision_count(&id).await, 2 + 7);
    let session = app.service.snapshot(&id).await.unwrap();
    assert_eq!(session.history, ws.history);
}

#[tokio::test]
async fn crash_between_write_and_rename_keeps_the_prior_revision() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), factory(news_world));
    let id = app.session(NEWS_TASK).await;
    let first = lanforge_core::update::init_lan("Summarize", "in", "out").unwrap();
    let (s, _) = app.put(&format!("/sessions/{id}/lan"), json!({"lan": to_value(&first)})).await;
    assert_eq!(s, StatusCode::OK);

    let mut second = first.clone();
    second.agents[0].execution.subtask_description = "Summarize briefly".into();
    app.service.store().inject_fault(Some(Fault::BeforeRename { skip: 0 }));
    let (s, body) = app.put(&format!("/sessions/{id}/lan"), json!({"lan": to_value(&second)})).await;
    assert_eq!((s, body["code"].clone()), (StatusCode::INTERNAL_SERVER_ERROR, json!("storage")));
    let (_, body) = app.get(&format!("/sessions/{id}/lan")).await;
    assert_eq!((body["revision"].clone(), lan_of(&body)), (json!(1), first.clone()));
    drop(app);

    let reopened = open(dir.path(), factory(news_world));
    let (_, body) = reopened.get(&format!("/sessions/{id}/lan")).await;
    assert_eq!((body["revision"].clone(), lan_of(&body)), (json!(1), first.clone()));
    let (_, body) = reopened.get(&format!("/sessions/{id}")).await;
    assert!(body["warnings"][0].as_str().unwrap().contains("unfinished write"), "{body}");
    let (s, _) = reopened.put(&format!("/sessions/{id}/lan"), json!({"lan": to_value(&second)})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(reopened.revision_count(&id).await, 3);
}

#[tokio::test]
async fn corrupted_revision_is_quarantined() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), factory(news_world));
    let id = app.session(NEWS_TASK).await;
    let first = lanforge_core::update::init_lan("Summarize", "in", "out").unwrap();
    app.put(&format!("/sessions/{id}/lan"), json!({"lan": to_value(&first)})).await;
    drop(app);
    std::fs::write(dir.path().join(&id).join("revisions/000001.json"), "{ not json").unwrap();
    let reopened = open(dir.path(), factory(news_world));
    assert_eq!(reopened.revision_count(&id).await, 1);
    let quarantined = std::fs::read_dir(dir.path().join(&id).join("quarantine")).unwrap().count();
    assert_eq!(quarantined, 1);
    let (_, body) = reopened.get(&format!("/sessions/{id}")).await;
    assert!(body["warnings"][0].as_str().unwrap().contains("quarantined"));
}

#[tokio::test]
async fn paused_pipeline_survives_restart_and_manual_edits_make_it_stale() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), factory(news_world));
    let id = app.session(NEWS_TASK).await;
    app.post(&format!("/sessions/{id}/examples"), json!({"id": "e1", "input": "x", "ground_truth": "checked summary"}))
        .await;
    app.post(&format!("/sessions/{id}/pipeline/start"), json!({"example_id": "e1", "policy": "interactive"}))
        .await;
    let (_, paused) = app.post(&format!("/sessions/{id}/pipeline/confirm"), json!({})).await;
    drop(app);

    let app = open(dir.path(), factory(news_world));
    let (_, now) = app.get(&format!("/sessions/{id}/pipeline")).await;
    assert_eq!(now["state"], paused["state"]);

    let (s, body) = app
        .call(Method::PATCH, &format!("/sessions/{id}/lan/agents/{}", lanforge_core::update::agent_name_for_task(NEWS_TASK)),
            Some(json!({"em_knowledge": ["Keep it short."]})))
        .await;
    assert_eq!(s, StatusCode::OK, "{body}");
    let (_, now) = app.get(&format!("/sessions/{id}/pipeline")).await;
    assert_eq!(now["state"]["stale"], true);
    let (s, _) = app.post(&format!("/sessions/{id}/pipeline/confirm"), json!({})).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, body) = app.post(&format!("/sessions/{id}/pipeline/retry"), json!({})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((body["state"]["stale"].clone(), body["state"]["current_step"].clone()), (json!(false), json!("gap")));
    let (s, body) = app.post(&format!("/sessions/{id}/pipeline/retry"), json!({"edited_document": {"gpa": 1}})).await;
    assert_eq!((s, body["code"].clone()), (StatusCode::UNPROCESSABLE_ENTITY, json!("invalid_intervention")));
    let (s, body) = app.post(&format!("/sessions/{id}/pipeline/abort"), json!({})).await;
    assert_eq!((s, body["state"]["status"].clone()), (StatusCode::OK, json!("aborted")));
    let (s, _) = app.post(&format!("/sessions/{id}/pipeline/start"), json!({"example_id": "missing"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn events_replay_the_pipeline_states() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), factory(news_world));
    let id = app.session(NEWS_TASK).await;
    let (snapshot, mut rx) = app.service.subscribe(&id).unwrap();
    assert!(matches!(snapshot, SessionEvent::Snapshot { revision: 0, state: None, .. }));
    app.post(&format!("/sessions/{id}/examples"), json!({"id": "e1", "input": "x", "ground_truth": "checked summary"}))
        .await;
    let mut responses = vec![];
    let (_, b) = app.post(&format!("/sessions/{id}/pipeline/start"), json!({"example_id": "e1", "policy": "interactive"})).await;
    responses.push(b["state"].clone());
    for _ in 0..4 {
        let (_, b) = app.post(&format!("/sessions/{id}/pipeline/confirm"), json!({})).await;
        responses.push(b["state"].clone());
    }
    let mut settled = vec![];
    let mut revisions = vec![];
    let mut last_seq = 0;
    while let Ok(e) = rx.try_recv() {
        assert!(e.seq() > last_seq);
        last_seq = e.seq();
        match e {
            SessionEvent::Pipeline { computing: false, state, .. } => {
                let v = serde_json::to_value(state).unwrap();
                if settled.last() != Some(&v) {
                    settled.push(v);
                }
            }
            SessionEvent::Revision { revision, .. } => revisions.push(revision),
            _ => {}
        }
    }
    assert_eq!(settled, responses);
    assert_eq!(revisions, vec![1]);
}

#[tokio::test]
async fn edits_are_refused_while_a_step_computes_and_abort_cancels_it() {
    use std::sync::mpsc;
    use std::sync::Mutex;
    let (entered_tx, entered_rx) = mpsc::channel::<()>();
    let (release_tx, release_rx) = mpsc::channel::<()>();
    let entered = Arc::new(Mutex::new(Some(entered_tx)));
    let release = Arc::new(Mutex::new(release_rx));
    let world = Arc::new(news_world());
    let f: lanforge_service::BackendFactory = {
        let world = world.clone();
        Arc::new(move |_: &str| {
            let world = world.clone();
            let entered = entered.clone();
            let release = release.clone();
            Ok(Arc::new(lanforge_core::gateway::FnBackend::new("slow", move |req| {
                if req.tag == "step:1" {
                    if let Some(tx) = entered.lock().unwrap().take() {
                        tx.send(()).unwrap();
                        release.lock().unwrap().recv().unwrap();
                    }
                }
                use lanforge_core::gateway::{Backend, CancelToken};
                world.complete(req, &CancelToken::new()).map(|r| r.text)
            })) as Arc<dyn lanforge_core::gateway::Backend>)
        })
    };
    let dir = tempfile::tempdir().unwrap();
    let app = Arc::new(open(dir.path(), f));
    let id = app.session(NEWS_TASK).await;
    app.post(&format!("/sessions/{id}/examples"), json!({"id": "e1", "input": "x", "ground_truth": "checked summary"}))
        .await;
    let bg = {
        let app = app.clone();
        let id = id.clone();
        tokio::spawn(async move {
            app.post(&format!("/sessions/{id}/pipeline/start"), json!({"example_id": "e1", "policy": "interactive"})).await
        })
    };
    tokio::task::spawn_blocking(move || entered_rx.recv().unwrap()).await.unwrap();
    let (_, view) = app.get(&format!("/sessions/{id}/pipeline")).await;
    assert_eq!(view["computing"], true);
    let (s, body) = app.post(&format!("/sessions/{id}/lan/agents"), json!({"name": "Extra"})).await;
    assert_eq!((s, body["code"].clone()), (StatusCode::CONFLICT, json!("pipeline_computing")));
    let (s, _) = app.post(&format!("/sessions/{id}/pipeline/confirm"), json!({})).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let aborter = {
        let app = app.clone();
        let id = id.clone();
        tokio::spawn(async move { app.post(&format!("/sessions/{id}/pipeline/abort"), json!({})).await })
    };
    tokio::time::sleep(std::time::Duration::from_millis(50)).await;
    release_tx.send(()).unwrap();
    let (s, started) = bg.await.unwrap();
    assert_eq!(s, StatusCode::OK);
    assert_eq!(started["state"]["status"], "aborted");
    assert_eq!(started["state"]["abort_reason"]["reason"], "cancelled");
    let (s, aborted) = aborter.await.unwrap();
    assert_eq!((s, aborted["state"]["status"].clone()), (StatusCode::OK, json!("aborted")));
    assert_eq!(app.revision_count(&id).await, 1);
}
