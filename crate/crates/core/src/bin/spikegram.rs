fn main() -> std::process::ExitCode {
    spikegram::cli::main()
}
