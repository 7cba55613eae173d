mod args;
mod commands;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, ConfigError};

const EXIT_CONFIG: u8 = 2;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    match err.downcast_ref::<henn::Error>() {
        Some(henn::Error::InvalidConfig(_) | henn::Error::InvalidTraining(_) | henn::Error::MatrixTooLarge { .. }) => {
            EXIT_CONFIG
        }
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => commands::cmd_train(a),
        Command::Evaluate(a) => commands::cmd_evaluate(a),
        Command::Compare(a) => commands::cmd_compare(a),
        Command::SleExperiment(a) => commands::cmd_sle_experiment(a),
        Command::FitSigmoid(a) => commands::cmd_fit_sigmoid(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
