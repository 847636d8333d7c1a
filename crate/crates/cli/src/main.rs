//! `rehab`: synthetic data, augmentation, training and cross-validated
//! evaluation of exercise quality scores from body-joint sequences.

mod args;
mod commands;
mod overlay;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};
use rehab_core::ingest::SCHEMA_TAG;
use rehab_core::seqnet::CHECKPOINT_TAG;

use args::{Cli, Command};

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or flag combinations; exit code 2.
    Usage(String),
    /// Everything else; exit code 1.
    Runtime(anyhow::Error),
}

impl From<rehab_core::Error> for Failure {
    fn from(e: rehab_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn version_text() -> String {
    format!(
        "rehab {}\nkeypoints {SCHEMA_TAG}\ncheckpoint {CHECKPOINT_TAG}\n",
        env!("CARGO_PKG_VERSION")
    )
}

fn run() -> Result<(), Failure> {
    let mut command = Cli::command();
    let argv = overlay::apply(&command, std::env::args_os().collect())?;
    let matches = command
        .try_get_matches_from_mut(argv)
        .unwrap_or_else(|e| e.exit());
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    if cli.version {
        print!("{}", version_text());
        return Ok(());
    }
    let Some(cmd) = cli.command else {
        return Err(Failure::Usage(format!(
            "no subcommand given\n\n{}",
            command.render_usage()
        )));
    };
    match &cmd {
        Command::Synth(a) => commands::synth(a),
        Command::Augment(a) => commands::augment(a),
        Command::Features(a) => commands::features(a),
        Command::Train(a) => commands::train(a),
        Command::Cv(a) => commands::cv(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Plot(a) => commands::plot(a),
        Command::Validate(a) => commands::validate(a),
        Command::MarkerPose(a) => commands::marker_pose(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
