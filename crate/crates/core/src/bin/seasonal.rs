fn main() {
    std::process::exit(seasonal_ess::cli::run(std::env::args_os()));
}
