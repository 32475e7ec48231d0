use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(contrastkit::cli::run(std::env::args_os()))
}
