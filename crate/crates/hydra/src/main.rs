fn main() {
    std::process::exit(hydra::cli::run(std::env::args().skip(1).collect()));
}
