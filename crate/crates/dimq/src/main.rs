fn main() {
    std::process::exit(dimq::cli::run());
}
