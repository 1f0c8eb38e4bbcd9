use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mghc_lab::cli::run(std::env::args_os()))
}
