use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(unmix_cli::run(std::env::args_os()))
}
