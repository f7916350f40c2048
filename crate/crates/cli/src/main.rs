fn main() {
    std::process::exit(sinkbss_cli::run(std::env::args_os()));
}
