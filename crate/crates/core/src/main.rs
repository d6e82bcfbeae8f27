fn main() {
    std::process::exit(skewlda::cli::main_with_args(std::env::args_os()));
}
