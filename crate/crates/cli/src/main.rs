fn main() {
    std::process::exit(nlgreen_cli::run(std::env::args_os()));
}
