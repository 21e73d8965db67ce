fn main() {
    std::process::exit(dgn_core::cli::run(std::env::args_os()));
}
