//! HTTP routes. Bodies are JSON and carry `"api_version": 1`.

use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use tokio::sync::broadcast::error::RecvError;

use lanforge_core::model::from_value;
use lanforge_core::update::{Intervention, SupervisionPolicy};

use crate::error::ApiError;
use crate::service::{AgentPatch, EdgeRef, LanEdit, NewAgent, NewExample, NewSession, Service};
use crate::session::SessionEvent;
use crate::API_VERSION;

type Svc = State<Arc<Service>>;

/// A JSON body. An `api_version` field, when present, must be 1.
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?;
        let mut value: Value = if bytes.iter().all(u8::is_ascii_whitespace) {
            Value::Object(Map::new())
        } else {
            serde_json::from_slice(&bytes).map_err(|e| ApiError::bad_request(format!("invalid JSON: {e}")))?
        };
        if let Value::Object(map) = &mut value {
            match map.remove("api_version") {
                None => {}
                Some(v) if v.as_u64() == Some(u64::from(API_VERSION)) => {}
                Some(v) => {
                    return Err(ApiError::new(
                        StatusCode::BAD_REQUEST,
                        "unsupported_api_version",
                        format!("api_version {v} is not supported; this server speaks {API_VERSION}"),
                    ))
                }
            }
        }
        serde_path_to_error::deserialize(value)
            .map(ApiJson)
            .map_err(|e| ApiError::bad_request(format!("{}: {}", e.path(), e.inner())))
    }
}

/// A JSON response with the API version stamped in.
pub struct Reply<T>(pub StatusCode, pub T);

impl<T: Serialize> IntoResponse for Reply<T> {
    fn into_response(self) -> Response {
        let mut value = serde_json::to_value(&self.1).expect("response serializes");
        if let Value::Object(map) = &mut value {
            map.insert("api_version".into(), json!(API_VERSION));
        } else {
            value = json!({"api_version": API_VERSION, "data": value});
        }
        (self.0, Json(value)).into_response()
    }
}

fn ok<T: Serialize>(body: T) -> Reply<T> {
    Reply(StatusCode::OK, body)
}

type ApiResult<T> = Result<Reply<T>, ApiError>;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/", get(root))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(session))
        .route("/sessions/{id}/lan", get(get_lan).put(put_lan))
        .route("/sessions/{id}/lan/agents", post(add_agent))
        .route("/sessions/{id}/lan/agents/{name}", patch(patch_agent).delete(delete_agent))
        .route("/sessions/{id}/lan/edges", post(add_edge).delete(delete_edge))
        .route("/sessions/{id}/run", post(run))
        .route("/sessions/{id}/traces/{n}", get(trace))
        .route("/sessions/{id}/examples", get(examples).post(add_example))
        .route("/sessions/{id}/pipeline", get(pipeline))
        .route("/sessions/{id}/pipeline/start", post(start))
        .route("/sessions/{id}/pipeline/confirm", post(confirm))
        .route("/sessions/{id}/pipeline/retry", post(retry))
        .route("/sessions/{id}/pipeline/abort", post(abort))
        .route("/sessions/{id}/revisions", get(revisions))
        .route("/sessions/{id}/revisions/{n}", get(revision))
        .route("/sessions/{id}/events", get(events))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(service)
}

async fn root(State(svc): Svc) -> Reply<Value> {
    ok(json!({"service": "lanforge", "sessions": svc.list_sessions().len(), "warnings": svc.warnings()}))
}

async fn list_sessions(State(svc): Svc) -> Reply<Value> {
    ok(json!({"sessions": svc.list_sessions()}))
}

async fn create_session(State(svc): Svc, ApiJson(req): ApiJson<NewSession>) -> ApiResult<impl Serialize> {
    Ok(Reply(StatusCode::CREATED, svc.create_session(req).await?))
}

async fn session(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(ok(svc.session(&id).await?))
}

async fn get_lan(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    let r = svc.lan(&id)?;
    Ok(ok(json!({"revision": r.revision, "lan": lanforge_core::model::to_value(&r.lan)})))
}

#[derive(Deserialize)]
struct PutLan {
    lan: Value,
}

async fn put_lan(State(svc): Svc, Path(id): Path<String>, ApiJson(body): ApiJson<PutLan>) -> ApiResult<impl Serialize> {
    let lan = from_value(body.lan)?;
    Ok(ok(svc.edit_lan(&id, LanEdit::Replace(lan)).await?))
}

async fn add_agent(State(svc): Svc, Path(id): Path<String>, ApiJson(body): ApiJson<NewAgent>) -> ApiResult<impl Serialize> {
    Ok(Reply(StatusCode::CREATED, svc.edit_lan(&id, LanEdit::AddAgent(body)).await?))
}

async fn patch_agent(
    State(svc): Svc,
    Path((id, name)): Path<(String, String)>,
    ApiJson(body): ApiJson<AgentPatch>,
) -> ApiResult<impl Serialize> {
    Ok(ok(svc.edit_lan(&id, LanEdit::PatchAgent(name, body)).await?))
}

async fn delete_agent(State(svc): Svc, Path((id, name)): Path<(String, String)>) -> ApiResult<impl Serialize> {
    Ok(ok(svc.edit_lan(&id, LanEdit::DeleteAgent(name)).await?))
}

async fn add_edge(State(svc): Svc, Path(id): Path<String>, ApiJson(body): ApiJson<EdgeRef>) -> ApiResult<impl Serialize> {
    Ok(Reply(StatusCode::CREATED, svc.edit_lan(&id, LanEdit::AddEdge(body)).await?))
}

async fn delete_edge(State(svc): Svc, Path(id): Path<String>, ApiJson(body): ApiJson<EdgeRef>) -> ApiResult<impl Serialize> {
    Ok(ok(svc.edit_lan(&id, LanEdit::DeleteEdge(body)).await?))
}

#[derive(Deserialize)]
struct RunBody {
    input: String,
}

async fn run(State(svc): Svc, Path(id): Path<String>, ApiJson(body): ApiJson<RunBody>) -> ApiResult<impl Serialize> {
    Ok(ok(svc.run(&id, body.input).await?))
}

async fn trace(State(svc): Svc, Path((id, n)): Path<(String, u64)>) -> ApiResult<impl Serialize> {
    Ok(ok(json!({"trace_id": n, "trace": svc.trace(&id, n).await?})))
}

async fn examples(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(ok(json!({"examples": svc.examples(&id).await?})))
}

async fn add_example(State(svc): Svc, Path(id): Path<String>, ApiJson(body): ApiJson<NewExample>) -> ApiResult<impl Serialize> {
    Ok(Reply(StatusCode::CREATED, svc.add_example(&id, body).await?))
}

async fn pipeline(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(ok(svc.pipeline(&id)?))
}

#[derive(Deserialize)]
struct StartBody {
    example_id: String,
    #[serde(default)]
    policy: SupervisionPolicy,
}

async fn start(State(svc): Svc, Path(id): Path<String>, ApiJson(body): ApiJson<StartBody>) -> ApiResult<impl Serialize> {
    Ok(ok(svc.start(&id, body.example_id, body.policy).await?))
}

async fn confirm(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(ok(svc.confirm(&id).await?))
}

async fn retry(State(svc): Svc, Path(id): Path<String>, ApiJson(body): ApiJson<Intervention>) -> ApiResult<impl Serialize> {
    Ok(ok(svc.retry(&id, Some(body)).await?))
}

async fn abort(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(ok(svc.abort(&id).await?))
}

async fn revisions(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(ok(json!({"revisions": svc.revisions(&id).await?})))
}

async fn revision(State(svc): Svc, Path((id, n)): Path<(String, u64)>) -> ApiResult<impl Serialize> {
    Ok(ok(svc.revision(&id, n).await?))
}

fn sse_event(e: &SessionEvent) -> Event {
    let mut value = serde_json::to_value(e).expect("event serializes");
    value["api_version"] = json!(API_VERSION);
    Event::default()
        .event(e.name())
        .id(e.seq().to_string())
        .data(value.to_string())
}

async fn events(
    State(svc): Svc,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let (snapshot, rx) = svc.subscribe(&id)?;
    let live = stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(e) => return Some((Ok(sse_event(&e)), rx)),
                Err(RecvError::Lagged(n)) => tracing::warn!("event subscriber lagged by {n}"),
                Err(RecvError::Closed) => return None,
            }
        }
    });
    let first = stream::once(async move { Ok(sse_event(&snapshot)) });
    Ok(Sse::new(first.chain(live)).keep_alive(KeepAlive::default()))
}
