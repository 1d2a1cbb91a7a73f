#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use lanforge_core::gateway::{Backend, FnBackend, GatewayError};
use lanforge_core::update::{agent_name_for_task, EngineConfig, FixedClock};
use lanforge_service::{router, BackendFactory, Service, ServiceConfig, Store};

pub struct App {
    pub service: Arc<Service>,
    pub router: Router,
}

pub fn config() -> ServiceConfig {
    ServiceConfig {
        engine: EngineConfig::default(),
        clock: Arc::new(FixedClock::epoch()),
    }
}

pub fn open(dir: &Path, factory: BackendFactory) -> App {
    let service = Service::open(Store::open(dir).unwrap(), factory, config()).unwrap();
    App {
        router: router(service.clone()),
        service,
    }
}

pub fn factory<B: Backend + 'static>(make: fn() -> B) -> BackendFactory {
    Arc::new(move |_: &str| Ok(Arc::new(make()) as Arc<dyn Backend>))
}

impl App {
    pub async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
        let req = match body {
            Some(b) => req.body(Body::from(b.to_string())).unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, value)
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call(Method::GET, uri, None).await
    }

    pub async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, Some(body)).await
    }

    pub async fn put(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::PUT, uri, Some(body)).await
    }

    /// Creates a session and returns its id.
    pub async fn session(&self, task: &str) -> String {
        let (status, body) = self
            .post("/sessions", json!({"api_version": 1, "task": task, "input": "an article", "output": "a summary"}))
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["id"].as_str().unwrap().to_string()
    }

    pub async fn revision_count(&self, id: &str) -> usize {
        self.get(&format!("/sessions/{id}/revisions")).await.1["revisions"].as_array().unwrap().len()
    }
}

pub const NEWS_TASK: &str = "Summarize news articles";

/// A summarizer that needs one more agent: the diagnosis asks for a critic,
/// which then produces the expected output.
pub fn news_world() -> FnBackend {
    let first = agent_name_for_task(NEWS_TASK);
    FnBackend::new("news-world", move |req| {
        let tag = req.tag.as_str();
        let v = match tag {
            t if t == format!("em:{first}") => json!({"thought": "t", "result": "summary"}),
            "cm:Critic" => json!({"thought": "t", "result": true}),
            "em:Critic" => json!({"thought": "t", "result": "checked summary"}),
            "step:1" | "complete:step:1" => json!({"gap": "the summary is unchecked"}),
            "step:2" => json!({"reason_type": "missing_agent", "reason_content": "nobody checks facts"}),
            "step:4" => json!({"parameters": {
                "agent": {"name": "Critic", "subtask_description": "Check the summary against the article", "output_description": "A checked summary"},
                "predecessors": [first.clone()],
                "successors": []
            }}),
            "judge" => json!({"thought": "t", "result": false}),
            _ => return Err(GatewayError::Provider { status: 400, message: tag.into() }),
        };
        Ok(v.to_string())
    })
}
