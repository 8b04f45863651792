fn main() {
    std::process::exit(symmnet_cli::run(std::env::args_os()));
}
