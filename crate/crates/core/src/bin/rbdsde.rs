fn main() {
    std::process::exit(rbdsde::cli::main_with_args(std::env::args_os()));
}
