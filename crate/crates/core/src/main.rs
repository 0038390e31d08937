fn main() -> std::process::ExitCode {
    ddgauss::cli::main()
}
