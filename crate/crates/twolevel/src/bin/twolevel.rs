use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use twolevel::cli::{parse_config, run, Experiment};

/// Exact and adiabatic-limit transition probabilities of driven two-level systems.
///
/// Any `--section.key=value` argument overrides the matching entry of the config file.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for rows.csv, fit.json, graph.*, meta.json.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Stokes graph of the leading potential (and optionally the full one).
    Trace,
    /// Exact transition probability on the T grid.
    Exact,
    /// Adiabatic-limit formula on the T grid.
    Adiabatic,
    /// Exact values, edge-constant fit and fitted adiabatic values.
    Sweep,
    /// Exact, single-line and naive product curves.
    Interference,
    /// Exact ratio with and without the geometric frequency term.
    Berry,
}

fn is_override(a: &str) -> bool {
    a.strip_prefix("--")
        .and_then(|r| r.split_once('='))
        .is_some_and(|(k, _)| k.contains('.'))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (overrides, rest): (Vec<String>, Vec<String>) =
        std::env::args().partition(|a| is_override(a));
    let args = Args::parse_from(rest);
    let text = match &args.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {}: {e}", p.display());
                return ExitCode::FAILURE;
            }
        },
        None => String::new(),
    };
    let exp = match args.command {
        Command::Trace => Experiment::Trace,
        Command::Exact => Experiment::Exact,
        Command::Adiabatic => Experiment::Adiabatic,
        Command::Sweep => Experiment::Sweep,
        Command::Interference => Experiment::Interference,
        Command::Berry => Experiment::Berry,
    };
    let result =
        parse_config(&text, &overrides).and_then(|cfg| run(exp, &cfg, args.out_dir.as_deref()));
    match result {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).unwrap_or_default()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
