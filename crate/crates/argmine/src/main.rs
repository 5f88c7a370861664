fn main() {
    std::process::exit(argmine::cli::main_with_args(std::env::args_os()));
}
