fn main() -> std::process::ExitCode {
    autoformulate::cli::main_exit()
}
