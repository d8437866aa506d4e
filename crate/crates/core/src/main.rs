fn main() {
    std::process::exit(hft::cli::run(std::env::args_os()));
}
