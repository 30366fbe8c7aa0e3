fn main() {
    std::process::exit(crossway_cli::run_cli(std::env::args_os()));
}
