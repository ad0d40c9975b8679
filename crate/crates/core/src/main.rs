use std::process::ExitCode;

fn main() -> ExitCode {
    permrank::cli::run(std::env::args_os())
}
