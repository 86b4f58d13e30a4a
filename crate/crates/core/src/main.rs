fn main() {
    std::process::exit(tdagof::cli::run(std::env::args_os()));
}
