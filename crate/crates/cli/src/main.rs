use std::process::ExitCode;

use clap::Parser;
use magworm_cli::app::{self, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("ERR: {}", app::one_line(&e.to_string()));
            return ExitCode::from(2);
        }
    };
    match app::run(cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERR: {}", app::one_line(&format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
