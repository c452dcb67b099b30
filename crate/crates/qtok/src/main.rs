use std::process::ExitCode;

fn main() -> ExitCode {
    qtok::cli::main_entry()
}
