use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ihl::cli::run(std::env::args_os()))
}
