fn main() {
    std::process::exit(korteweg::cli::run(std::env::args_os()));
}
