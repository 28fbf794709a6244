fn main() {
    std::process::exit(plap_cli::run(std::env::args_os()));
}
