fn main() -> std::process::ExitCode {
    vocab_compat::cli::run_from_args(std::env::args().collect())
}
