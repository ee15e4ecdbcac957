fn main() {
    std::process::exit(vic_cli::run());
}
