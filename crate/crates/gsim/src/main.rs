fn main() {
    std::process::exit(gsim::cli::run());
}
