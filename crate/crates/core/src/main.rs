fn main() {
    std::process::exit(skelalign::cli::run(std::env::args_os()));
}
