fn main() {
    std::process::exit(eegline::cli::run(std::env::args_os()));
}
