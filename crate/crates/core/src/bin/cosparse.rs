fn main() {
    std::process::exit(cosparse::cli::run(std::env::args_os()));
}
