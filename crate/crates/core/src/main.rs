fn main() {
    std::process::exit(sis_monitor::cli::main_with_args(std::env::args_os()));
}
