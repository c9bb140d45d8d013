fn main() {
    std::process::exit(leadaug::cli::run());
}
