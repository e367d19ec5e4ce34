fn main() {
    std::process::exit(thicklab::cli::main_with_args(std::env::args_os()));
}
