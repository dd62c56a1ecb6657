use std::process::ExitCode;

use clap::Parser;
use quilt_cli::args::{Cli, Command};
use quilt_cli::commands::{cmd_diagnose, cmd_evaluate, cmd_quilt, cmd_simulate, cmd_tune};
use quilt_cli::exit::{error_json, exit_code, EXIT_FAILURE};
use quilt_cli::sweep::cmd_sweep;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QUILT_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();

    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("{{\"error\":\"thread_pool\",\"message\":\"{e}\"}}");
            return ExitCode::from(EXIT_FAILURE as u8);
        }
    }

    let outcome = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Quilt(a) => cmd_quilt(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
