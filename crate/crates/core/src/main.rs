fn main() {
    std::process::exit(stripefit::cli::run_cli(std::env::args_os()));
}
