fn main() -> std::process::ExitCode {
    truthy_server::cli::main()
}
