use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use ipflab_core::config::validate_text;
use ipflab_core::report::{run_file, RunOptions};

/// Spectral factorization and past/future subspace experiments.
#[derive(Parser)]
#[command(name = "ipflab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks of a config and write report.json plus CSV tables.
    Run {
        config: PathBuf,
        /// Run tasks one after another on the calling thread.
        #[arg(long)]
        serial: bool,
        /// Write outputs here instead of the config's output_dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Grid exponent for the pointwise checks.
        #[arg(long)]
        m: Option<u32>,
    },
    /// Check a config against the schema and its invariants without running it.
    Validate { config: PathBuf },
}

const EXIT_TASK_FAILED: u8 = 1;
const EXIT_ERROR: u8 = 2;

fn print(value: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("JSON value serializes")
    );
}

fn fail(code: &str, message: String) -> ExitCode {
    let err = json!({"error": {"code": code, "message": message}});
    eprintln!("{}", serde_json::to_string(&err).expect("JSON value serializes"));
    ExitCode::from(EXIT_ERROR)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Validate { config } => {
            let text = match fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => return fail("IO", format!("{}: {e}", config.display())),
            };
            let diags = validate_text(&text);
            print(&json!({"valid": diags.is_empty(), "diagnostics": diags}));
            if diags.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_ERROR)
            }
        }
        Command::Run {
            config,
            serial,
            output_dir,
            m,
        } => {
            let opts = RunOptions { serial, output_dir, m };
            let report = match run_file(&config, &opts) {
                Ok(r) => r,
                Err(e) => return fail(e.code(), e.to_string()),
            };
            let tasks: Vec<Value> = report
                .tasks
                .iter()
                .map(|t| json!({"task": t.task, "status": t.status, "error": t.error, "files": t.files}))
                .collect();
            let ok = report.succeeded();
            print(&json!({
                "status": if ok { "OK" } else { "PARTIAL_FAILURE" },
                "output_dir": report.output_dir,
                "tasks": tasks,
            }));
            if ok {
                ExitCode::SUCCESS
            } else {
                let failed: Vec<Value> = report
                    .failed()
                    .map(|t| json!({"task": t.task, "error": t.error}))
                    .collect();
                let err = json!({"error": {"code": "TASK_FAILED", "failed": failed}});
                eprintln!("{}", serde_json::to_string(&err).expect("JSON value serializes"));
                ExitCode::from(EXIT_TASK_FAILED)
            }
        }
    }
}
