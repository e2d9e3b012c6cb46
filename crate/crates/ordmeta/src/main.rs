fn main() {
    std::process::exit(ordmeta::cli::run(std::env::args_os()));
}
