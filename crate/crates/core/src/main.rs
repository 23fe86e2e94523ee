fn main() {
    std::process::exit(wd3_core::runner::cli::run(std::env::args_os()));
}
