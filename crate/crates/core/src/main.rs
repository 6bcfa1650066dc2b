fn main() -> std::process::ExitCode {
    metaratio::cli::main_from_args(std::env::args_os())
}
