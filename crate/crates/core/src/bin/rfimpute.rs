fn main() {
    std::process::exit(rfimpute::experiments::cli::run(std::env::args_os()));
}
