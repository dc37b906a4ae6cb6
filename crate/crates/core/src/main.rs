fn main() {
    std::process::exit(sparsebandit::harness::cli::cli(std::env::args_os()));
}
