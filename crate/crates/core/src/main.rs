fn main() {
    std::process::exit(agridw::cli::run(std::env::args_os()));
}
