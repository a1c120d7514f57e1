use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(drolab_cli::run(std::env::args_os()))
}
