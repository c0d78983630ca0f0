fn main() -> std::process::ExitCode {
    solwave::cli::main()
}
