use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use tracing_subscriber::EnvFilter;

use lanforge_core::gateway::{Backend, RemoteBackend, ReplayBackend, Transcript};
use lanforge_core::testing::poetry;
use lanforge_service::{router, BackendFactory, Service, ServiceConfig, Store};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendKind {
    /// The HTTP provider configured by LANFORGE_LLM_URL, _KEY and _MODEL.
    Remote,
    /// The built-in rule-based poetry translation world (for demos).
    Poetry,
}

/// Serves the session API.
#[derive(Debug, Parser)]
#[command(name = "lanforge-server", version)]
struct Args {
    #[arg(long, env = "LANFORGE_DATA_DIR", default_value = "lanforge-data")]
    data_dir: PathBuf,
    #[arg(long, env = "LANFORGE_BIND_ADDR", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long, value_enum, default_value = "remote")]
    backend: BackendKind,
    /// Serve every session from this recorded transcript instead of a model.
    #[arg(long, conflicts_with = "backend")]
    replay: Option<PathBuf>,
}

fn backends(args: &Args) -> Result<BackendFactory, String> {
    if let Some(path) = &args.replay {
        let transcript = Transcript::load(path).map_err(|e| e.to_string())?;
        return Ok(Arc::new(move |_: &str| Ok(Arc::new(ReplayBackend::new(transcript.clone())) as Arc<dyn Backend>)));
    }
    Ok(match args.backend {
        BackendKind::Remote => Arc::new(|_: &str| Ok(Arc::new(RemoteBackend::from_env()?) as Arc<dyn Backend>)),
        BackendKind::Poetry => Arc::new(|_: &str| Ok(Arc::new(poetry::backend()) as Arc<dyn Backend>)),
    })
}

#[tokio::main]
async fn main() -> std::process::ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let factory = match backends(&args) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return std::process::ExitCode::from(2);
        }
    };
    let service = match Store::open(&args.data_dir).and_then(|s| Service::open(s, factory, ServiceConfig::default())) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot open store: {e}");
            return std::process::ExitCode::from(3);
        }
    };
    let listener = match tokio::net::TcpListener::bind(args.bind).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {}: {e}", args.bind);
            return std::process::ExitCode::from(4);
        }
    };
    tracing::info!(addr = %args.bind, data = %args.data_dir.display(), "listening");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if let Err(e) = axum::serve(listener, router(service)).with_graceful_shutdown(shutdown).await {
        eprintln!("error: {e}");
        return std::process::ExitCode::from(1);
    }
    std::process::ExitCode::SUCCESS
}
