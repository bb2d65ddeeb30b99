fn main() {
    std::process::exit(cstar::cli::dispatch(std::env::args_os()));
}
