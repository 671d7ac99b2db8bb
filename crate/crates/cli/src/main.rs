use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = match ksi_cli::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                ksi_cli::EXIT_USAGE
            } else {
                ksi_cli::EXIT_OK
            });
        }
    };
    ExitCode::from(ksi_cli::run(cli))
}
