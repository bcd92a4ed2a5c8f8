fn main() {
    std::process::exit(treeattn::cli::main_with_args(std::env::args_os()));
}
