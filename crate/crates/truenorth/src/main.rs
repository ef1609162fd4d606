fn main() {
    std::process::exit(truenorth::cli::run());
}
