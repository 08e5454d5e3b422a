fn main() {
    std::process::exit(discotec::cli::run(std::env::args_os()));
}
