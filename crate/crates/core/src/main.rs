fn main() {
    std::process::exit(tada::cli::run(std::env::args_os()));
}
