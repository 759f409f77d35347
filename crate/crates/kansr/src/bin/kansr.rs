fn main() {
    std::process::exit(kansr::cli::run(std::env::args_os()));
}
