use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(gtiming_cli::run_args(std::env::args_os()))
}
