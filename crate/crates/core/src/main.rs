use std::process::ExitCode;

fn main() -> ExitCode {
    let code = lpgreedy::cli::run_from_args(std::env::args_os());
    ExitCode::from(code as u8)
}
