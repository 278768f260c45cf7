fn main() -> std::process::ExitCode {
    rgnpp::cli::main()
}
