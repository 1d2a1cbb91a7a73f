use std::fs;
use std::path::Path;
use std::sync::Arc;

use chrono::{TimeZone, Utc};
use serde::Deserialize;
use serde_json::{json, Value};

use lanforge_core::gateway::{Backend, Gateway, RecordingBackend, RemoteBackend, ReplayBackend, Transcript};
use lanforge_core::model::{deserialize_lan, from_value, lan_edit_script, script_cost, to_value, validate_lan, DocumentError, Lan};
use lanforge_core::runtime::RunTrace;
use lanforge_core::testing::poetry;
use lanforge_core::update::{check_satisfaction, exact_match, Clock, EngineConfig, FixedClock, SystemClock, TrainingExample};
use lanforge_service::{router, BackendFactory, Service, ServiceConfig, Store};

use crate::client::Client;
use crate::error::CliError;
use crate::{BackendKind, Cli, Command, Judge};

/// One line of an examples file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleEntry {
    #[serde(default)]
    pub id: Option<String>,
    pub input: String,
    pub ground_truth: String,
}

pub fn read_examples(path: &Path) -> Result<Vec<ExampleEntry>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    let entries: Vec<ExampleEntry> = serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?;
    if entries.is_empty() {
        return Err(CliError::input(path, "no examples"));
    }
    Ok(entries)
}

fn read_lan(path: &Path) -> Result<Lan, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    deserialize_lan(&text).map_err(|e| CliError::input(path, e))
}

/// Where model calls go for this invocation.
enum Source {
    Live(BackendKind),
    Replay(Arc<ReplayBackend>),
    Record(Arc<RecordingBackend>),
}

fn live_backend(kind: BackendKind) -> Result<Arc<dyn Backend>, lanforge_core::gateway::GatewayError> {
    Ok(match kind {
        BackendKind::Remote => Arc::new(RemoteBackend::from_env()?),
        BackendKind::Poetry => Arc::new(poetry::backend()),
    })
}

impl Source {
    fn factory(&self) -> BackendFactory {
        match self {
            Source::Live(kind) => {
                let kind = *kind;
                Arc::new(move |_: &str| live_backend(kind))
            }
            Source::Replay(b) => {
                let b = b.clone();
                Arc::new(move |_: &str| Ok(b.clone() as Arc<dyn Backend>))
            }
            Source::Record(b) => {
                let b = b.clone();
                Arc::new(move |_: &str| Ok(b.clone() as Arc<dyn Backend>))
            }
        }
    }
}

struct Context {
    client: Client,
    json: bool,
}

impl Context {
    fn emit(&self, value: Value, human: impl FnOnce(&Value) -> String) {
        if self.json {
            println!("{value}");
        } else {
            let text = human(&value);
            if !text.is_empty() {
                println!("{text}");
            }
        }
    }
}

fn clock(cli: &Cli) -> Arc<dyn Clock> {
    match cli.source_date_epoch.and_then(|s| Utc.timestamp_opt(s, 0).single()) {
        Some(at) => Arc::new(FixedClock(at)),
        None => Arc::new(SystemClock),
    }
}

fn connect(cli: &Cli, source: &Source) -> Result<Client, CliError> {
    if let (false, Some(url)) = (cli.local, &cli.server) {
        if !matches!(source, Source::Live(_)) {
            return Err(CliError::Usage(
                "--replay and --record drive a local store; start the server with --replay instead".into(),
            ));
        }
        return Ok(Client::remote(url));
    }
    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Store(e.to_string()))?;
    let store = Store::open(&cli.data_dir).map_err(|e| CliError::Store(e.to_string()))?;
    let config = ServiceConfig {
        engine: EngineConfig::default(),
        clock: clock(cli),
    };
    let service = Service::open(store, source.factory(), config).map_err(|e| CliError::Store(e.to_string()))?;
    for w in service.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(Client::local(router(service), runtime))
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let source = match &cli.command {
        Command::Train { replay: Some(p), .. } => {
            let transcript = Transcript::load(p).map_err(|e| CliError::input(p, e))?;
            Source::Replay(Arc::new(ReplayBackend::new(transcript)))
        }
        Command::Train { record: Some(_), .. } => {
            let inner = live_backend(cli.backend)?;
            Source::Record(Arc::new(RecordingBackend::new(inner)))
        }
        _ => Source::Live(cli.backend),
    };
    if let Command::Validate { file } = &cli.command {
        return validate(file, cli.json);
    }
    let ctx = Context {
        client: connect(&cli, &source)?,
        json: cli.json,
    };
    match &cli.command {
        Command::Init { task, input, output, lan } => init(&ctx, task, input, output, lan.as_deref()),
        Command::Run { session, input, trace } => run(&ctx, session, input, trace.as_deref()),
        Command::Train {
            session,
            examples,
            record,
            ..
        } => {
            let result = train(&ctx, session, examples);
            match (&source, record) {
                (Source::Record(rec), Some(path)) => {
                    rec.transcript().save(path).map_err(|e| CliError::input(path, e))?;
                }
                (Source::Replay(replay), _) if result.is_ok() && !replay.is_finished() => {
                    eprintln!("warning: replay transcript has unused exchanges after #{}", replay.served());
                }
                _ => {}
            }
            result
        }
        Command::Eval { session, examples, judge } => eval(&ctx, session, examples, *judge, cli.backend),
        Command::Diff { session, from, to } => diff(&ctx, session, *from, *to),
        Command::Validate { .. } => unreachable!("handled above"),
    }
}

fn validate(file: &Path, json: bool) -> Result<(), CliError> {
    let lan = read_lan(file)?;
    let violations = validate_lan(&lan);
    if !violations.is_empty() {
        return Err(CliError::Invalid(violations));
    }
    if json {
        println!("{}", json!({"valid": true, "agents": lan.agents.len(), "edges": lan.edges.len()}));
    } else {
        println!("valid: {} agent(s), {} edge(s)", lan.agents.len(), lan.edges.len());
    }
    Ok(())
}

fn init(ctx: &Context, task: &Option<String>, input: &Option<String>, output: &Option<String>, lan: Option<&Path>) -> Result<(), CliError> {
    let start = lan.map(read_lan).transpose()?;
    let pick = |flag: &Option<String>, from_lan: Option<&String>, name: &str| {
        flag.clone()
            .or_else(|| from_lan.cloned())
            .ok_or_else(|| CliError::Usage(format!("--{name} is required without --lan")))
    };
    let body = json!({
        "task_description": pick(task, start.as_ref().map(|l| &l.task_description), "task")?,
        "input_description": pick(input, start.as_ref().map(|l| &l.input_description), "input")?,
        "output_description": pick(output, start.as_ref().map(|l| &l.output_description), "output")?,
    });
    let created = ctx.client.post("/sessions", body)?;
    let id = created["id"].as_str().unwrap_or_default().to_string();
    let mut revision = created["revision"]["revision"].clone();
    if let Some(lan) = start {
        let put = ctx.client.put(&format!("/sessions/{id}/lan"), json!({"lan": to_value(&lan)}))?;
        revision = put["revision"]["revision"].clone();
    }
    ctx.emit(json!({"session": id, "revision": revision}), |v| v["session"].as_str().unwrap_or_default().to_string());
    Ok(())
}

fn run(ctx: &Context, session: &str, input: &str, trace_file: Option<&Path>) -> Result<(), CliError> {
    let result = ctx.client.post(&format!("/sessions/{session}/run"), json!({"input": input}))?;
    if let Some(path) = trace_file {
        let text = serde_json::to_string_pretty(&result["trace"]).expect("json value");
        fs::write(path, text + "\n").map_err(|e| CliError::input(path, e))?;
    }
    ctx.emit(
        json!({"trace_id": result["trace_id"], "final_output": result["trace"]["final_output"]}),
        |v| v["final_output"].as_str().unwrap_or_default().to_string(),
    );
    Ok(())
}

fn ensure_examples(ctx: &Context, session: &str, entries: &[ExampleEntry]) -> Result<Vec<TrainingExample>, CliError> {
    let queued: Vec<TrainingExample> = serde_json::from_value(ctx.client.get(&format!("/sessions/{session}/examples"))?["examples"].clone())
        .unwrap_or_default();
    let mut out = Vec::new();
    for e in entries {
        let existing = e.id.as_ref().and_then(|id| queued.iter().find(|q| &q.id == id));
        let example = match existing {
            Some(q) if q.input == e.input && q.ground_truth == e.ground_truth => q.clone(),
            _ => {
                let added = ctx.client.post(
                    &format!("/sessions/{session}/examples"),
                    json!({"id": e.id, "input": e.input, "ground_truth": e.ground_truth}),
                )?;
                serde_json::from_value(added).map_err(|e| CliError::Store(e.to_string()))?
            }
        };
        out.push(example);
    }
    Ok(out)
}

fn train(ctx: &Context, session: &str, examples: &Path) -> Result<(), CliError> {
    let entries = read_examples(examples)?;
    let queued = ensure_examples(ctx, session, &entries)?;
    let mut rows = Vec::new();
    for example in &queued {
        let view = ctx.client.post(
            &format!("/sessions/{session}/pipeline/start"),
            json!({"example_id": example.id, "policy": "auto_confirm"}),
        )?;
        let state = &view["state"];
        rows.push(json!({
            "example": example.id,
            "status": state["status"],
            "iterations": state["iteration"],
            "strategies": state["strategies_applied"],
            "abort_reason": state["abort_reason"],
            "revision": view["revision"],
        }));
        if !ctx.json {
            let mut line = format!(
                "{:<12} {:<10} strategies={} revision={}",
                example.id,
                state["status"].as_str().unwrap_or("?"),
                state["strategies_applied"],
                view["revision"]
            );
            if !state["abort_reason"].is_null() {
                line.push_str(&format!(" reason={}", state["abort_reason"]));
            }
            println!("{line}");
        }
    }
    let failed = rows.iter().filter(|r| r["status"] != "satisfied").count();
    let lan = ctx.client.get(&format!("/sessions/{session}/lan"))?;
    let summary = json!({
        "session": session,
        "examples": rows,
        "failed": failed,
        "revision": lan["revision"],
        "agents": lan["lan"]["agents"].as_array().map_or(0, Vec::len),
    });
    if ctx.json {
        println!("{summary}");
    } else {
        println!("trained {} example(s), final revision {}, {} agent(s)", rows.len(), summary["revision"], summary["agents"]);
    }
    if failed > 0 {
        return Err(CliError::Untrained { failed, total: rows.len() });
    }
    Ok(())
}

fn eval(ctx: &Context, session: &str, examples: &Path, judge: Judge, backend: BackendKind) -> Result<(), CliError> {
    let entries = read_examples(examples)?;
    let gateway = match judge {
        Judge::Exact => None,
        Judge::Llm => Some(Gateway::new(live_backend(backend)?)),
    };
    let mut rows = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let id = e.id.clone().unwrap_or_else(|| format!("test{}", i + 1));
        let result = ctx.client.post(&format!("/sessions/{session}/run"), json!({"input": e.input}))?;
        let trace: RunTrace = serde_json::from_value(result["trace"].clone()).map_err(|e| CliError::Store(e.to_string()))?;
        let pass = match &gateway {
            None => exact_match(&trace.final_output, &e.ground_truth),
            Some(gw) => {
                let example = TrainingExample::new(id.clone(), e.input.clone(), e.ground_truth.clone());
                check_satisfaction(&trace, &example, gw, 3)
                    .map_err(|err| CliError::Api {
                        status: 502,
                        code: "judge_failed".into(),
                        message: err.to_string(),
                        violations: vec![],
                    })?
                    .0
            }
        };
        if !ctx.json {
            println!("{} {id}", if pass { "PASS" } else { "FAIL" });
        }
        rows.push(json!({"example": id, "pass": pass, "output": trace.final_output, "trace_id": result["trace_id"]}));
    }
    let passed = rows.iter().filter(|r| r["pass"] == true).count();
    let mean = passed as f64 / rows.len() as f64;
    let judge_name = match judge {
        Judge::Exact => "exact",
        Judge::Llm => "llm",
    };
    let summary = json!({
        "judge": judge_name,
        "authoritative": judge == Judge::Exact,
        "results": rows,
        "passed": passed,
        "total": rows.len(),
        "mean_score": mean,
    });
    ctx.emit(summary, |v| {
        let mut s = format!("mean score {:.3} ({passed}/{})", mean, v["total"]);
        if judge == Judge::Llm {
            s.push_str(" [llm judge, not authoritative]");
        }
        s
    });
    Ok(())
}

fn revision_lan(ctx: &Context, session: &str, n: u64) -> Result<Lan, CliError> {
    let rev = ctx.client.get(&format!("/sessions/{session}/revisions/{n}"))?;
    from_value(rev["lan"].clone()).map_err(|e: DocumentError| CliError::Store(e.to_string()))
}

fn diff(ctx: &Context, session: &str, from: u64, to: u64) -> Result<(), CliError> {
    let old = revision_lan(ctx, session, from)?;
    let new = revision_lan(ctx, session, to)?;
    let script = lan_edit_script(&old, &new);
    let lmd = script_cost(&script);
    ctx.emit(
        json!({"from": from, "to": to, "lmd": lmd, "script": script}),
        |_| {
            let mut out: Vec<String> = script.iter().map(|op| format!("{op}  (cost {})", op.cost())).collect();
            out.push(format!("LMD {lmd}"));
            out.join("\n")
        },
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_ids_are_optional_and_fields_strict() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ex.json");
        fs::write(&path, r#"[{"input": "a", "ground_truth": "b"}, {"id": "x", "input": "c", "ground_truth": "d"}]"#).unwrap();
        let entries = read_examples(&path).unwrap();
        assert_eq!((entries[0].id.clone(), entries[1].id.as_deref()), (None, Some("x")));
        fs::write(&path, r#"[{"input": "a", "truth": "b"}]"#).unwrap();
        assert_eq!(read_examples(&path).unwrap_err().exit_code(), 2);
        fs::write(&path, "[]").unwrap();
        assert!(read_examples(&path).is_err());
    }
}
