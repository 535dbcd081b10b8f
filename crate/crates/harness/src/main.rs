fn main() {
    std::process::exit(nltv_harness::cli::run(std::env::args_os()));
}
