mod config;
mod error;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::error::RunError;

#[derive(Parser)]
#[command(name = "lattice-pdo", version, about = "Lattice pseudo-differential operator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Recorded in the manifest; core tasks are deterministic.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn write_outputs(dir: &Path, files: &[(String, Vec<u8>)], manifest: serde_json::Value) -> Result<(), RunError> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in files {
        std::fs::write(dir.join(name), body)?;
    }
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

fn run(config_path: &Path, out: Option<PathBuf>, threads: Option<usize>, seed: Option<u64>) -> Result<(), RunError> {
    let start = Instant::now();
    let raw =
        std::fs::read_to_string(config_path).map_err(|e| RunError::config("$", format!("cannot read {}: {e}", config_path.display())))?;
    let config = config::parse(&raw)?;
    if let Some(n) = threads {
        if n == 0 {
            return Err(RunError::config("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Numeric { reason: e.to_string() })?;
    }
    let output = tasks::run_task(&config)?;
    let dir = out.unwrap_or_else(|| config.output.directory.clone());
    let files: Vec<serde_json::Value> = output
        .files
        .iter()
        .map(|(name, body)| {
            serde_json::json!({
                "name": name,
                "bytes": body.len(),
                "sha256": hex::encode(Sha256::digest(body)),
            })
        })
        .collect();
    let manifest = serde_json::json!({
        "tool": "lattice-pdo",
        "version": lattice_pdo::VERSION,
        "task": config.task.name(),
        "config": config,
        "threads": rayon::current_num_threads(),
        "seed": seed,
        "status": output.failure.as_ref().map_or("ok".to_string(), |e| e.to_line()),
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "files": files,
    });
    write_outputs(&dir, &output.files, manifest)?;
    match output.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        config,
        out,
        threads,
        seed,
    } = cli.command;
    match run(&config, out, threads, seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
