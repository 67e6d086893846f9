fn main() {
    std::process::exit(photoncorr::cli::main_with_args(std::env::args_os()));
}
