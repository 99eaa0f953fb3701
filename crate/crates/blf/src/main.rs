fn main() {
    std::process::exit(blf::cli::run(std::env::args_os()));
}
