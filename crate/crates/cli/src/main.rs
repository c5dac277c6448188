use std::io::Write;

use clap::Parser;
use moire_cli::{execute, Cli};
use serde_json::json;

/// Prints the summary; a closed stdout is not worth a panic.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(summary) => emit(&serde_json::to_string_pretty(&summary).expect("summary serializes")),
        Err(err) => {
            eprintln!("moire: {err}");
            emit(&json!({ "error": { "kind": err.kind(), "message": err.to_string() } }).to_string());
            std::process::exit(err.exit_code());
        }
    }
}
