fn main() {
    std::process::exit(r2pack::cli::run(std::env::args_os()));
}
