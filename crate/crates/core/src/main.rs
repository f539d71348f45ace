fn main() {
    std::process::exit(rfcache::cli::main_with_args(std::env::args_os()));
}
