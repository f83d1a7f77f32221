fn main() {
    std::process::exit(cerm::cli::main_with_args(std::env::args_os()));
}
