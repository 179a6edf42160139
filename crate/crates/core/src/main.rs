fn main() {
    std::process::exit(fingait::cli::run(std::env::args_os()));
}
