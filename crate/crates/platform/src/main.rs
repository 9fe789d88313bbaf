fn main() -> std::process::ExitCode {
    lectern_platform::cli::main()
}
