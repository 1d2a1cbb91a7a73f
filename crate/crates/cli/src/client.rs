//! One request/response interface over either a running server or an
//! in-process service backed by a local store.

use std::io::Read;

use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use crate::error::CliError;

pub enum Client {
    Local { runtime: tokio::runtime::Runtime, router: Router },
    Remote { agent: ureq::Agent, base: String },
}

impl Client {
    pub fn local(router: Router, runtime: tokio::runtime::Runtime) -> Self {
        Client::Local { runtime, router }
    }

    pub fn remote(base: &str) -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Client::Remote {
            agent,
            base: base.trim_end_matches('/').to_string(),
        }
    }

    pub fn get(&self, path: &str) -> Result<Value, CliError> {
        self.call(Method::GET, path, None)
    }

    pub fn post(&self, path: &str, body: Value) -> Result<Value, CliError> {
        self.call(Method::POST, path, Some(body))
    }

    pub fn put(&self, path: &str, body: Value) -> Result<Value, CliError> {
        self.call(Method::PUT, path, Some(body))
    }

    /// Sends one request; non-2xx answers become [`CliError::Api`].
    pub fn call(&self, method: Method, path: &str, body: Option<Value>) -> Result<Value, CliError> {
        let body = body.map(|mut b| {
            if let Value::Object(map) = &mut b {
                map.insert("api_version".into(), json!(lanforge_service::API_VERSION));
            }
            b.to_string()
        });
        let (status, text) = match self {
            Client::Local { runtime, router } => runtime.block_on(async {
                let req = Request::builder()
                    .method(method)
                    .uri(path)
                    .header("content-type", "application/json")
                    .body(body.map_or_else(Body::empty, Body::from))
                    .expect("valid request");
                let resp = router.clone().oneshot(req).await.expect("router is infallible");
                let status = resp.status().as_u16();
                let bytes = resp.into_body().collect().await.map(|c| c.to_bytes()).unwrap_or_default();
                (status, String::from_utf8_lossy(&bytes).into_owned())
            }),
            Client::Remote { agent, base } => {
                let url = format!("{base}{path}");
                let unreachable = |e: ureq::Error| CliError::Unreachable {
                    url: url.clone(),
                    message: e.to_string(),
                };
                let sent = match (method.as_str(), body) {
                    ("GET", _) => agent.get(&url).call(),
                    ("POST", b) => agent.post(&url).header("content-type", "application/json").send(b.unwrap_or_default()),
                    ("PUT", b) => agent.put(&url).header("content-type", "application/json").send(b.unwrap_or_default()),
                    ("PATCH", b) => agent.patch(&url).header("content-type", "application/json").send(b.unwrap_or_default()),
                    ("DELETE", Some(b)) => agent
                        .delete(&url)
                        .header("content-type", "application/json")
                        .force_send_body()
                        .send(b),
                    ("DELETE", None) => agent.delete(&url).call(),
                    (m, _) => return Err(CliError::Usage(format!("unsupported method {m}"))),
                };
                let mut resp = sent.map_err(unreachable)?;
                let status = resp.status().as_u16();
                let mut text = String::new();
                resp.body_mut()
                    .as_reader()
                    .read_to_string(&mut text)
                    .map_err(|e| CliError::Unreachable {
                        url: url.clone(),
                        message: e.to_string(),
                    })?;
                (status, text)
            }
        };
        let value: Value = if text.trim().is_empty() {
            Value::Null
        } else {
            serde_json::from_str(&text).map_err(|e| CliError::Api {
                status,
                code: "bad_response".into(),
                message: format!("response is not JSON: {e}"),
                violations: vec![],
            })?
        };
        if (200..300).contains(&status) {
            return Ok(value);
        }
        Err(CliError::Api {
            status,
            code: value["code"].as_str().unwrap_or("error").to_string(),
            message: value["message"].as_str().unwrap_or_default().to_string(),
            violations: value["violations"].as_array().cloned().unwrap_or_default(),
        })
    }
}
