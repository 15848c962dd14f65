fn main() {
    std::process::exit(umse::cli::main_with_args(std::env::args_os()));
}
