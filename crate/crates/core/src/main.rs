fn main() {
    std::process::exit(hiersparse::cli::run());
}
