use std::process::ExitCode;

fn main() -> ExitCode {
    embreg::cli::main_from(std::env::args_os())
}
