fn main() {
    std::process::exit(condcov::cli::run_command(std::env::args_os()));
}
