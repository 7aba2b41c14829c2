fn main() {
    std::process::exit(fem_surrogate::cli::main_with_args(std::env::args_os()));
}
