fn main() {
    std::process::exit(doclair_cli::run(std::env::args_os()));
}
