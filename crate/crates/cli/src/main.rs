fn main() {
    std::process::exit(tcnn_cli::run(std::env::args_os()));
}
