fn main() {
    std::process::exit(lifebranch::cli::run_cli(std::env::args_os()));
}
