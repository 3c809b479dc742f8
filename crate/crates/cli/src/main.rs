mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Session;

fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err
        .chain()
        .filter_map(|cause| cause.downcast_ref::<roweeder_core::Error>())
        .any(roweeder_core::Error::is_config);
    if usage {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = cli.pipeline.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs as usize)
        .build()?;
    let session = Session { config, pool };
    match &cli.command {
        Command::Ingest(a) => commands::ingest(&session, a),
        Command::Synth(a) => commands::synth(&session, a),
        Command::PseudoLabel(a) => commands::pseudo_label(&session, a),
        Command::Evaluate(a) => commands::evaluate(&session, a),
        Command::Render(a) => commands::render(&session, a),
        Command::Folds(a) => commands::folds(&session, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
