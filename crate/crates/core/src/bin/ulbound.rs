fn main() -> std::process::ExitCode {
    ulbound::cli::run()
}
