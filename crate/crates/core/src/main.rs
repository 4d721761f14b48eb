fn main() {
    std::process::exit(biphc::cli::run(std::env::args_os()));
}
