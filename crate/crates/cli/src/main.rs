mod cli;
mod config;
mod error;
mod output;
mod run;

use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command, Overrides};
use config::PipelineConfig;
use error::CliError;
use run::Mode;

fn resolve(o: &Overrides) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &o.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    cfg.apply(o)?;
    Ok(cfg)
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Synth(args) => run::synth(args),
        Command::ScanSparsity(args) => run::analyze(Mode::ScanSparsity, resolve(&args.common)?, Some(args)),
        Command::Run(o) => run::analyze(Mode::Run, resolve(o)?, None),
        Command::Fit(o) => run::analyze(Mode::Fit, resolve(o)?, None),
        Command::Permute(o) => run::analyze(Mode::Permute, resolve(o)?, None),
        Command::Holdout(o) => run::analyze(Mode::Holdout, resolve(o)?, None),
        Command::Sensitivity(o) => run::analyze(Mode::Sensitivity, resolve(o)?, None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("configuration error: cannot set thread count: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ccakit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
