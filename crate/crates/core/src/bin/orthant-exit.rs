fn main() {
    std::process::exit(orthant_exit::cli::main_with_args(std::env::args_os()));
}
