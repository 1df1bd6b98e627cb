fn main() -> std::process::ExitCode {
    relcontrol::cli::main()
}
