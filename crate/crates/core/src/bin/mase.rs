fn main() {
    std::process::exit(mase::cli::run(std::env::args_os()));
}
