fn main() {
    std::process::exit(loglab::cli::run(std::env::args_os()));
}
