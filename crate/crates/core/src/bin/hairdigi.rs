fn main() {
    std::process::exit(hairdigi::cli::run(std::env::args_os()));
}
