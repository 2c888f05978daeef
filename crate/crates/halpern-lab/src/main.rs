fn main() {
    std::process::exit(halpern_lab::cli::run());
}
