fn main() {
    std::process::exit(weaklog::cli::run(std::env::args_os()));
}
