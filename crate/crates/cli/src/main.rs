fn main() {
    std::process::exit(histoseg_cli::run(std::env::args_os()));
}
