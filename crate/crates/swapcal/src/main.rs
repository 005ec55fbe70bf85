use std::process::ExitCode;

fn main() -> ExitCode {
    swapcal::cli::run()
}
