//! `queso`: synthesize rewrite rules, optimize circuits, check equivalence
//! and estimate fidelity.

mod commands;
mod manifest;
mod settings;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use settings::Settings;

#[derive(Parser, Debug)]
#[command(
    name = "queso",
    version,
    about = "Rewrite-rule synthesis and circuit optimization"
)]
struct Cli {
    /// TOML config file, or a run manifest whose settings to reuse
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print a JSON report on stdout
    #[arg(long, global = true)]
    json: bool,

    /// Where to write the run manifest
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(flatten)]
    settings: Settings,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize and prune rewrite rules
    Synth {
        /// Rule file to write
        #[arg(short, long, default_value = "rules.txt")]
        out: PathBuf,
    },
    /// Optimize a QASM circuit with a rule file
    Optimize {
        input: PathBuf,
        /// Optimized circuit; printed when omitted
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Check two QASM circuits for equivalence
    Verify { a: PathBuf, b: PathBuf },
    /// Estimate the success probability of a circuit on a device
    Fidelity { input: PathBuf },
    /// Repeat the run recorded in a manifest
    Rerun { manifest: PathBuf },
}

fn run(cli: Cli) -> Result<i32> {
    let s = settings::resolve(cli.settings, cli.config.as_deref())?;
    let jobs = match s.jobs {
        Some(0) => anyhow::bail!("--jobs must be positive"),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()?;
    log::debug!("running with {jobs} worker threads");

    let manifest = cli.manifest.as_deref();
    let report = match &cli.command {
        Command::Synth { out } => commands::synth(s, out, manifest)?,
        Command::Optimize { input, out } => commands::optimize(s, input, out.as_deref(), manifest)?,
        Command::Verify { a, b } => commands::verify(s, a, b, manifest)?,
        Command::Fidelity { input } => commands::fidelity(s, input, manifest)?,
        Command::Rerun { manifest } => commands::rerun(manifest)?,
    };
    let text = if cli.json {
        let mut body = report.body;
        body["command"] = serde_json::json!(report.manifest.command);
        body["manifest"] = serde_json::to_value(&report.manifest)?;
        serde_json::to_string_pretty(&body)?
    } else {
        report.summary
    };
    match writeln!(std::io::stdout(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(report.exit),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QUESO_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
