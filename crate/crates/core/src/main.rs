use std::process::ExitCode;

fn main() -> ExitCode {
    dynet::cli::run_cli(std::env::args_os()).into()
}
