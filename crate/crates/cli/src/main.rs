use anyhow::Context;
use clap::{Parser, ValueEnum};
use phototaxis_core::config::{parse_config, CaseConfig};
use phototaxis_core::runner::{Command, Runner};
use std::path::PathBuf;
use std::process::ExitCode;

/// Onset of phototactic bioconvection: radiation, base state, neutral curves
/// and critical modes.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,

    /// Case configuration (`key = value` lines); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Do not read or write the on-disk cache.
    #[arg(long)]
    no_cache: bool,

    /// Worker threads; 1 runs sequentially, 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Cmd {
    Radiation,
    BaseState,
    NeutralCurve,
    Critical,
    Table,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Radiation => Command::Radiation,
            Cmd::BaseState => Command::BaseState,
            Cmd::NeutralCurve => Command::NeutralCurve,
            Cmd::Critical => Command::Critical,
            Cmd::Table => Command::Table,
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<CaseConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    Ok(parse_config(&text)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    let cfg = match load_config(cli.config.as_ref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: stage `config` failed: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = phototaxis_core::par::configure_threads(cli.threads) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }

    let runner = Runner::new(&cli.out, !cli.no_cache);
    match runner.run(cli.command.into(), &cfg) {
        Ok(outcome) => {
            for f in &outcome.files {
                log::info!("wrote {}", f.display());
            }
            if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for f in &outcome.failures {
                    eprintln!("error: {f}");
                }
                eprintln!("error: {} case(s) failed; their rows are flagged in the output", outcome.failures.len());
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
