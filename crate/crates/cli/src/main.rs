//! `multiphonic`: analyze recordings, synthesize test tones, and compare
//! listener reports and pitch-tracker output against the analysis.

mod analyze;
mod config;
mod error;
mod fixtures;
mod io;
mod perception;
mod synth;
mod trackers;

use std::panic;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "multiphonic",
    version,
    about = "Pitch analysis of multiphonic and quasi-harmonic tones"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze WAV files and emit JSON reports.
    Analyze(analyze::AnalyzeArgs),
    /// Render a tone specification to WAV.
    Synth(synth::SynthArgs),
    /// Aggregate listening-test reports against an analysis.
    Perception(perception::PerceptionArgs),
    /// Summarize pitch-tracker traces against an analysis.
    Trackers(trackers::TrackersArgs),
    /// Regenerate the fixture corpus.
    Fixtures(fixtures::FixturesArgs),
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Analyze(a) => analyze::run(a),
        Command::Synth(a) => synth::run(a),
        Command::Perception(a) => perception::run(a),
        Command::Trackers(a) => trackers::run(a),
        Command::Fixtures(a) => fixtures::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", CliError::input(first.trim_start_matches("error: ")));
            return error::ErrorClass::Input.exit_code();
        }
    };
    panic::set_hook(Box::new(|_| {}));
    let outcome = panic::catch_unwind(|| dispatch(&cli)).unwrap_or_else(|payload| {
        let what = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unexpected failure".into());
        Err(CliError::internal(what))
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.class.exit_code()
        }
    }
}
