use std::process::ExitCode;

fn main() -> ExitCode {
    pshgcn::cli::main_with_args(std::env::args_os())
}
