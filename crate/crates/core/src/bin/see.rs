fn main() {
    std::process::exit(see_core::cli::run(std::env::args_os()));
}
