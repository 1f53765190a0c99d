fn main() {
    std::process::exit(hnsense::cli::run(std::env::args_os()));
}
