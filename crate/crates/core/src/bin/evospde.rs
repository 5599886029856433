fn main() {
    std::process::exit(evospde::cli::main_with_args(std::env::args_os()));
}
