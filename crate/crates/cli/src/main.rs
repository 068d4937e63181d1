//! `barypot run <config>` and `barypot validate <config>`.

mod config;
mod error;
mod output;
mod scenarios;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::Experiment;
use crate::error::CliError;
use crate::scenarios::Output;

#[derive(Parser)]
#[command(name = "barypot", version, about = "Barycentric interpolation experiments on [-1, 1]")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn manifest(exp: &Experiment, outputs: &[Output], started: Instant) -> String {
    let files: Vec<_> = outputs
        .iter()
        .map(|o| json!({"path": o.path, "rows": o.rows(), "bytes": o.contents.len()}))
        .collect();
    let value = json!({
        "version": concat!("barypot ", env!("CARGO_PKG_VERSION")),
        "scenario": exp.scenario.name(),
        "n_list": exp.n_list,
        "config": exp.raw,
        "files": files,
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    let mut s = serde_json::to_string_pretty(&value).expect("manifest serializes");
    s.push('\n');
    s
}

fn run(path: &Path) -> Result<String, CliError> {
    let started = Instant::now();
    let exp = config::load(path)?;
    let outputs = scenarios::run(&exp)?;
    output::commit(&exp.outputs, &outputs, || manifest(&exp, &outputs, started))?;
    Ok(format!(
        "{}: wrote {} files to {}",
        exp.scenario.name(),
        outputs.len() + 1,
        exp.outputs.display()
    ))
}

fn validate(path: &Path) -> Result<String, CliError> {
    let exp = config::load(path)?;
    Ok(format!("ok: scenario {} with n_list {:?}", exp.scenario.name(), exp.n_list))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(config),
        Command::Validate { config } => validate(config),
    };
    match result {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
