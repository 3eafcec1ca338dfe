fn main() {
    std::process::exit(memqkd::cli::run(std::env::args_os()));
}
