fn main() {
    std::process::exit(intelm::cli::run(std::env::args_os()));
}
