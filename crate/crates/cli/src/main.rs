fn main() {
    std::process::exit(storesize_cli::run(std::env::args_os()));
}
