use std::process::ExitCode;

fn main() -> ExitCode {
    c3e::cli::main_with_args(std::env::args_os())
}
