fn main() {
    std::process::exit(omnitok::cli::run(std::env::args_os()));
}
