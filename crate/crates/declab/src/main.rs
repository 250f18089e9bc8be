use std::process::ExitCode;

fn main() -> ExitCode {
    declab::cli::run()
}
