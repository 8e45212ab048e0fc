fn main() {
    std::process::exit(fomkit_cli::run(std::env::args_os()));
}
