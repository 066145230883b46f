fn main() {
    std::process::exit(polarfloor::cli::run(std::env::args_os()));
}
