use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(esa_rl::cli::main(std::env::args_os()))
}
