fn main() {
    std::process::exit(bias_audit::cli::run(std::env::args_os()));
}
