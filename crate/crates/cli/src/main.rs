//! `lanforge`: create sessions, run and train networks, evaluate and diff them.

mod client;
mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    /// The HTTP provider configured by LANFORGE_LLM_URL, _KEY and _MODEL.
    Remote,
    /// The built-in rule-based poetry translation world (for demos).
    Poetry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Judge {
    /// Whitespace-insensitive equality; needs no backend.
    Exact,
    /// Ask the model whether the output satisfies the ground truth.
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    AutoConfirm,
}

#[derive(Debug, Parser)]
#[command(name = "lanforge", version, about = "Build and train LLM agent networks from a few examples")]
pub struct Cli {
    /// Session service URL. Ignored with --local.
    #[arg(long, global = true, env = "LANFORGE_SERVER")]
    pub server: Option<String>,
    /// Operate on the local store directly, without a server.
    #[arg(long, global = true)]
    pub local: bool,
    #[arg(long, global = true, env = "LANFORGE_DATA_DIR", default_value = "lanforge-data")]
    pub data_dir: PathBuf,
    /// Model backend for local sessions and the LLM judge.
    #[arg(long, global = true, value_enum, default_value = "remote")]
    pub backend: BackendKind,
    /// Stamp new knowledge and revisions with this Unix time instead of now.
    #[arg(long, global = true, env = "SOURCE_DATE_EPOCH")]
    pub source_date_epoch: Option<i64>,
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a session with a single-agent network, or with the network in --lan.
    Init {
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        input: Option<String>,
        #[arg(long)]
        output: Option<String>,
        /// Start from this network document.
        #[arg(long)]
        lan: Option<PathBuf>,
    },
    /// Run the session's network on one input.
    Run {
        #[arg(long)]
        session: String,
        #[arg(long)]
        input: String,
        /// Write the full run trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Train the network on every example in FILE, in order.
    Train {
        #[arg(long)]
        session: String,
        /// JSON array of {id?, input, ground_truth}.
        #[arg(long)]
        examples: PathBuf,
        #[arg(long, value_enum, default_value = "auto-confirm")]
        policy: Policy,
        /// Answer every model call from this transcript (local only).
        #[arg(long, conflicts_with = "record")]
        replay: Option<PathBuf>,
        /// Save every model call to this transcript (local only).
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Run every example and score the outputs.
    Eval {
        #[arg(long)]
        session: String,
        #[arg(long)]
        examples: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        judge: Judge,
    },
    /// Edit script and modification distance between two revisions.
    Diff {
        #[arg(long)]
        session: String,
        #[arg(long)]
        from: u64,
        #[arg(long)]
        to: u64,
    },
    /// Check a network document against the save rules.
    Validate { file: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e, json);
            ExitCode::from(e.exit_code())
        }
    }
}

fn report(e: &CliError, json: bool) {
    if json {
        println!("{}", e.to_json());
        return;
    }
    eprintln!("error: {e}");
    if let CliError::Api { violations, .. } = e {
        for v in violations {
            eprintln!("  {}", v["message"].as_str().map_or_else(|| v.to_string(), str::to_string));
        }
    }
    if let CliError::Invalid(violations) = e {
        for v in violations {
            let kind = error::violation_json(v)["kind"].as_str().unwrap_or_default().to_string();
            println!("{kind}: {v}");
        }
    }
}
