//! `styleprobe`: extract acoustic features, analyse latent spaces against them and render
//! the tables and gradient figures.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use styleprobe::ErrorKind;

use args::{Cli, Command};

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 1,
        ErrorKind::Io => 2,
        ErrorKind::Numerical => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::from_env(
        env_logger::Env::default().filter_or("STYLEPROBE_LOG", cli.log_level()),
    )
    .format_timestamp(None)
    .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::error!("cannot size the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Extract(a) => commands::extract(a, &cli.out_dir),
        Command::Analyze(a) => commands::analyze(a, &cli.out_dir, cli.seed),
        Command::Reduce(a) => commands::reduce(a, &cli.out_dir, cli.seed),
        Command::Gradients(a) => commands::gradients(a, &cli.out_dir),
        Command::Render(a) => commands::render(a, &cli.out_dir),
        Command::Synth(a) => commands::synth(a, &cli.out_dir, cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_documented_codes() {
        assert_eq!(exit_code(ErrorKind::Validation), 1);
        assert_eq!(exit_code(ErrorKind::Io), 2);
        assert_eq!(exit_code(ErrorKind::Numerical), 3);
    }
}
