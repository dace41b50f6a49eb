fn main() -> std::process::ExitCode {
    jvm_testgen::cli::main()
}
